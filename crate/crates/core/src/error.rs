use crate::autodiff::AdError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("missing inputs: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("training diverged in stage {stage} of iteration {iteration} at epoch {epoch}: loss {loss:e} vs stage start {start:e}")]
    Divergence {
        stage: char,
        iteration: usize,
        epoch: usize,
        loss: f64,
        start: f64,
    },
    #[error("non-finite gradient in stage {stage}, term {term}, epoch {epoch}")]
    NonFinite { stage: char, term: String, epoch: usize },
    #[error("newton iteration failed at step {step} (t = {t:e}): residual {residual:e} after {iters} iterations; try halving the time step")]
    Newton {
        step: usize,
        t: f64,
        residual: f64,
        iters: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
