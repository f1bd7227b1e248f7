//! Character-level sign tokens: nearest-neighbour quantization against a
//! learned codebook, trained by context prediction with straight-through
//! VQ terms.

mod codebook;
mod context;
mod loss;
mod model;
mod train;

pub use codebook::{CharCodebook, QuantizedSequence, FULL_SCALE_CODEBOOK_SIZE, S0_ID};
pub use context::ContextModel;
pub use loss::{cpc_backward, cpc_loss, vq_loss, CpcGrads, CpcLoss, Negatives, VqLoss};
pub use model::{cluster_purity, codebook_usage, normalize_counts, sample_batch_negatives, VqGrads, VqSign};
pub use train::{continue_training, kmeans_pp_init, restart_dead_codes, train_vq_sign, VqEpochLog, VqTrainConfig};
