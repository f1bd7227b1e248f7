//! Frozen toy decoder standing in for a language model, the text loss, joint
//! fine-tuning of the sign side, and inference.

mod decoder;
mod finetune;
mod loss;
mod model;

pub use decoder::{
    copy_accuracy, pretrain_decoder, DecoderConfig, DecoderPass, GenerationOutput, ToyDecoder, BOS, EOS,
    FIRST_TEXT_TOKEN, PAD, PROMPT,
};
pub use finetune::{finetune, mean_sim_loss, mmd_term, sim_loss_and_grads, FinetuneConfig, FinetuneStepLog, Pair};
pub use loss::{finetune_loss, sim_loss, sim_loss_grad};
pub use model::{
    serialize_prompt, translate, PromptPayload, SignGrads, SignModel, SignSentence, DEFAULT_PROMPT_TEMPLATE,
};
