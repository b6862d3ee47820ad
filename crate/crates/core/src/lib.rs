pub mod autodiff;
pub mod basis;
pub mod checkpoint;
pub mod data;
pub mod dense;
pub mod error;
pub mod graph;
pub mod layers;
pub mod ops;
pub mod oracle;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod verify;

pub use basis::{BasisSpec, FavardCoeffs, FavardParams, PropagationSequence};
pub use checkpoint::Checkpoint;
pub use data::{load_dataset, save_dataset, Dataset};
pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use graph::{build_graph_matrix, csr_from_edges, spmm, Graph, GraphMatrixKind, SparseMatrix};
pub use layers::{Decomposition, PolyFilter};
pub use rng::{Purpose, Stream};
pub use tensor::CoeffTensor;
pub use train::{Model, ModelVariant, TrainConfig};
