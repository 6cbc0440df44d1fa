use alloc::vec::Vec;

use super::{ContextSubset, LanguageModel, ModelError, VocabId};

/// Greedy decoding: appends the argmax of the full-prefix distribution
/// until `max_new` tokens were added or the model's end-of-sequence token
/// comes up. The end token itself is not appended.
pub fn greedy_decode<M: LanguageModel + ?Sized>(
    model: &M,
    prompt: &[VocabId],
    max_new: usize,
) -> Result<Vec<VocabId>, ModelError> {
    if prompt.is_empty() {
        return Err(ModelError::InvalidSubset("greedy decoding needs a non-empty prompt".into()));
    }
    let eos = model.eos();
    let mut sequence = prompt.to_vec();
    for _ in 0..max_new {
        let target = sequence.len();
        let subset = ContextSubset::full_prefix(&sequence, target)?;
        let next = model.evaluate(&subset)?.argmax();
        if Some(next) == eos {
            break;
        }
        sequence.push(next);
    }
    Ok(sequence)
}
