//! Prototype model of conventional meaning: a word's prototype is the mean
//! contrastive encoding of its conventional senses, and a candidate meaning
//! is scored by an exponential kernel of its distance to that prototype.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::contrastive::EncoderParams;
use crate::corpus::SenseInventory;
use crate::embeddings::{euclidean_distance, EmbeddingTable};
use crate::error::{Error, Result};
use crate::eval_mrr::{mrr, rank_groundtruth, ChoiceItem};
use crate::reranker::{CandidateSet, Reranker};

pub const DEFAULT_KERNEL_WIDTH: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct PrototypeModel {
    encoder: Arc<EncoderParams>,
    sense_embeddings: Arc<EmbeddingTable>,
    inventory: Arc<SenseInventory>,
    kernel_width: f64,
    // Prototypes do not depend on the kernel width, so models that differ
    // only in width share this cache.
    prototypes: Arc<RwLock<HashMap<String, Arc<[f64]>>>>,
}

impl PrototypeModel {
    pub fn new(
        encoder: Arc<EncoderParams>,
        sense_embeddings: Arc<EmbeddingTable>,
        inventory: Arc<SenseInventory>,
        kernel_width: f64,
    ) -> Result<Self> {
        if !(kernel_width > 0.0) {
            return Err(Error::Invalid(format!(
                "kernel width must be positive, got {kernel_width}"
            )));
        }
        if sense_embeddings.dim() != encoder.input_dim() {
            return Err(Error::LengthMismatch {
                left: sense_embeddings.dim(),
                right: encoder.input_dim(),
            });
        }
        for (_, senses) in inventory.iter() {
            for s in senses {
                sense_embeddings.get(&s.sense_id)?;
            }
        }
        Ok(PrototypeModel {
            encoder,
            sense_embeddings,
            inventory,
            kernel_width,
            prototypes: Default::default(),
        })
    }

    pub fn with_kernel_width(&self, kernel_width: f64) -> Result<Self> {
        if !(kernel_width > 0.0) {
            return Err(Error::Invalid(format!(
                "kernel width must be positive, got {kernel_width}"
            )));
        }
        Ok(PrototypeModel {
            kernel_width,
            ..self.clone()
        })
    }

    pub fn kernel_width(&self) -> f64 {
        self.kernel_width
    }

    pub fn encoder(&self) -> &EncoderParams {
        &self.encoder
    }

    pub fn inventory(&self) -> &SenseInventory {
        &self.inventory
    }

    /// Mean encoding of the word's conventional senses. Senses are summed in
    /// sense_id order so the result does not depend on inventory order.
    pub fn prototype(&self, word: &str) -> Result<Arc<[f64]>> {
        if let Some(p) = self.prototypes.read().unwrap().get(word) {
            return Ok(p.clone());
        }
        let senses = self
            .inventory
            .senses(word)
            .ok_or_else(|| Error::UnknownWord(word.to_string()))?;
        let mut ids: Vec<&str> = senses.iter().map(|s| s.sense_id.as_str()).collect();
        ids.sort_unstable();
        let mut sum = vec![0.0; self.encoder.output_dim()];
        for id in &ids {
            let e = self.encoder.encode(self.sense_embeddings.get(id)?)?;
            sum.iter_mut().zip(&e).for_each(|(s, x)| *s += x);
        }
        let n = ids.len() as f64;
        let proto: Arc<[f64]> = sum.into_iter().map(|s| s / n).collect();
        self.prototypes.write().unwrap().insert(word.to_string(), proto.clone());
        Ok(proto)
    }

    /// `exp(-d(encoded, prototype(word)) / h_m)`.
    pub fn similarity(&self, encoded: &[f64], word: &str) -> Result<f64> {
        Ok(self.log_similarity(encoded, word)?.exp())
    }

    /// Logarithm of [`similarity`](Self::similarity), which stays finite
    /// where the kernel itself underflows.
    pub fn log_similarity(&self, encoded: &[f64], word: &str) -> Result<f64> {
        let proto = self.prototype(word)?;
        Ok(-euclidean_distance(encoded, &proto)? / self.kernel_width)
    }
}

/// A dev query: its candidate list and its multiple-choice item.
#[derive(Clone, Debug)]
pub struct DevQuery {
    pub candidates: CandidateSet,
    pub item: ChoiceItem,
}

/// Grid value of `h_m` with the best dev MRR of the reranked top-1
/// prediction. Earlier grid values win ties. Falls back to the default
/// width without dev data.
pub fn select_kernel_width(
    reranker: &Reranker<'_>,
    dev: &[DevQuery],
    eval_embeddings: &EmbeddingTable,
    grid: &[f64],
) -> Result<f64> {
    if dev.is_empty() || grid.is_empty() {
        return Ok(DEFAULT_KERNEL_WIDTH);
    }
    let mut best: Option<(f64, f64)> = None;
    for &width in grid {
        let model = reranker.model().with_kernel_width(width)?;
        let candidate = reranker.with_model(&model);
        let mut ranks = Vec::with_capacity(dev.len());
        for q in dev {
            let ranked = candidate.rerank(&q.candidates)?;
            let top = &ranked.candidates[0].candidate;
            let prediction = eval_embeddings.get(&top.definition_embedding_id)?;
            ranks.push(rank_groundtruth(prediction, &q.item, eval_embeddings)?);
        }
        let score = mrr(&ranks)?;
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((width, score));
        }
    }
    Ok(best.map(|(w, _)| w).unwrap_or(DEFAULT_KERNEL_WIDTH))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SenseDef;
    use crate::embeddings::EmbeddingKind;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    /// Near-identity 2-d encoder: a small-slope tanh layer whose scale is
    /// undone by the output layer.
    fn linear_encoder() -> EncoderParams {
        let s = 1e-6;
        EncoderParams::from_parts(
            2,
            2,
            2,
            vec![s, 0.0, 0.0, s],
            vec![0.0; 2],
            vec![1.0 / s, 0.0, 0.0, 1.0 / s],
            vec![0.0; 2],
        )
        .unwrap()
    }

    fn model(senses: &[(&str, &str, [f64; 2])], width: f64) -> PrototypeModel {
        let mut inv: BTreeMap<String, Vec<SenseDef>> = BTreeMap::new();
        let mut table = EmbeddingTable::new(2, EmbeddingKind::Sentence).unwrap();
        for (word, id, v) in senses {
            inv.entry(word.to_string()).or_default().push(SenseDef {
                sense_id: id.to_string(),
                definition: format!("def {id}"),
                pos: None,
            });
            table.insert(*id, v.to_vec()).unwrap();
        }
        PrototypeModel::new(
            Arc::new(linear_encoder()),
            Arc::new(table),
            Arc::new(SenseInventory::new(inv).unwrap()),
            width,
        )
        .unwrap()
    }

    #[test]
    fn prototype_is_mean_of_encodings() {
        let m = model(
            &[
                ("hot", "h1", [1.0, 0.0]),
                ("hot", "h2", [3.0, 0.0]),
                ("cold", "c1", [0.0, 2.0]),
            ],
            1.0,
        );
        let p = m.prototype("hot").unwrap();
        assert_abs_diff_eq!(p[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-9);
        let single = m.prototype("cold").unwrap();
        let direct = m.encoder().encode(&[0.0, 2.0]).unwrap();
        assert_eq!(&*single, direct.as_slice());
        assert!(matches!(m.prototype("warm"), Err(Error::UnknownWord(_))));
    }

    #[test]
    fn prototype_ignores_sense_order() {
        let a = model(
            &[
                ("w", "s1", [0.1, 0.7]),
                ("w", "s2", [0.3, -0.2]),
                ("w", "s3", [0.9, 0.4]),
            ],
            1.0,
        );
        let b = model(
            &[
                ("w", "s3", [0.9, 0.4]),
                ("w", "s1", [0.1, 0.7]),
                ("w", "s2", [0.3, -0.2]),
            ],
            1.0,
        );
        assert_eq!(a.prototype("w").unwrap(), b.prototype("w").unwrap());
    }

    #[test]
    fn kernel_values() {
        let m = model(&[("w", "s", [0.0, 0.0])], 0.5);
        let proto = m.prototype("w").unwrap().to_vec();
        assert_eq!(m.similarity(&proto, "w").unwrap(), 1.0);
        let at_width = [proto[0] + 0.5, proto[1]];
        assert_abs_diff_eq!(m.similarity(&at_width, "w").unwrap(), (-1.0f64).exp(), epsilon = 1e-12);
        let half = m.similarity(&[proto[0] + 0.3, proto[1]], "w").unwrap();
        let full = m.similarity(&[proto[0] + 0.6, proto[1]], "w").unwrap();
        assert_abs_diff_eq!(full, half * half, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_width_and_missing_senses() {
        let m = model(&[("w", "s", [0.0, 0.0])], 0.5);
        assert!(m.with_kernel_width(0.0).is_err());
        let mut inv = BTreeMap::new();
        inv.insert(
            "w".to_string(),
            vec![SenseDef {
                sense_id: "missing".into(),
                definition: "x".into(),
                pos: None,
            }],
        );
        let table = EmbeddingTable::new(2, EmbeddingKind::Sentence).unwrap();
        assert!(PrototypeModel::new(
            Arc::new(linear_encoder()),
            Arc::new(table),
            Arc::new(SenseInventory::new(inv).unwrap()),
            0.1
        )
        .is_err());
    }
}
