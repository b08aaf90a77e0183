use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("empty basis: no occupation vector satisfies N_max = {n_max}, E_cut = {e_cut}")]
    EmptyBasis { n_max: u32, e_cut: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("dilation: {0}")]
    Dilation(String),
    #[error("symmetry: {0}")]
    Symmetry(String),
    #[error("group closure exceeded {0} elements")]
    GroupOverflow(usize),
    #[error("infrared failure: {0}")]
    Infrared(String),
    #[error("spectral projection: {0}")]
    Projection(String),
    #[error("transformation function: {0}")]
    Transport(String),
    #[error("parameter outside declared region: {0}")]
    Region(String),
    #[error("Feshbach pair failure: {0}")]
    Pair(String),
    #[error("window exit at level {level}: |E| = {value:.3e} exceeds {threshold:.3e}")]
    Window { level: usize, value: f64, threshold: f64 },
    #[error("root finder: {0}")]
    Root(String),
    #[error("iteration: {0}")]
    Iteration(String),
    #[error("eigenvector: {0}")]
    Eigenvector(String),
    #[error("oracle: {0}")]
    Oracle(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
