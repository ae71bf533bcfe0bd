//! Deep embedded clustering with an optional spatial prior on the latent
//! space.

mod anomaly;
mod checkpoint;
mod head;
mod loss;
mod train;

pub use anomaly::{anomaly_distance, write_grid_csv};
pub use checkpoint::SavedModel;
pub use head::{
    argmax_rows, kl_loss_and_grad, kl_row, soft_assign, target_distribution, Assignments,
    ClusterHead, KlGrad,
};
pub use loss::{
    evaluate_heads, joint_loss, spatial_loss_and_grad, HeadEval, JointBatch, JointLoss,
    LossParts, LossWeights, SpatialBatch,
};
pub use train::{
    encoder_inputs, train, write_log_csv, EpochLog, Phase, TrainConfig, TrainedModel, Variant,
};
