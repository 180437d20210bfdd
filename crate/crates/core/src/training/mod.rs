//! Small parametric reward heads: DPO for temporal preferences,
//! cross-entropy over the progress grid, and completion BCE.

mod backend;
mod head;
mod losses;

pub use backend::{head_as_backend, HeadBackend};
pub use head::{
    head_input, head_loss, input_dim, output_arity, train_head, HeadConfig, HeadDataset, RewardHead, CONTRASTIVE_ANSWERS,
};
pub use losses::{
    completion_bce, completion_bce_grad, dpo_loss, dpo_loss_grad, dpo_margin, progress_nll, progress_nll_grad,
};
