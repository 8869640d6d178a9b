//! Opposite-set disentanglement measurements: per-feature change tables,
//! target-normalized ratios, top-k rankings, emotion-proxy disturbance and
//! landmark displacement.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::edit::{apply_edit, DirectionMatrix, ScalerVector};
use crate::error::{Error, Result};
use crate::face::{analytic_landmarks, latent_to_params, render, sample_latent, LandmarkSet, LatentCode, MixingMap, RenderConfig, SemanticParams, Slot, SLOT_COUNT};
use crate::nn::Regressor;

/// Smallest target change a table may be normalized by.
pub const MIN_TARGET_DELTA: f64 = 1e-6;

/// Generator context shared by every measurement.
#[derive(Clone, Copy, Debug)]
pub struct EvalContext<'a> {
    pub mixing: &'a MixingMap,
    pub render: &'a RenderConfig,
}

impl EvalContext<'_> {
    pub fn params(&self, w: &LatentCode) -> Result<SemanticParams> {
        latent_to_params(w, self.mixing)
    }
}

/// Where attribute values come from.
#[derive(Clone, Copy, Debug)]
pub enum AttributeSource<'a> {
    /// Ground-truth parameters of the latent.
    Oracle,
    /// The trained regressor applied to the rendered image.
    Regressor(&'a Regressor),
}

impl AttributeSource<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            AttributeSource::Oracle => "oracle",
            AttributeSource::Regressor(_) => "regressor",
        }
    }

    pub fn attributes(&self, ctx: &EvalContext, w: &LatentCode) -> Result<Vec<f64>> {
        let p = ctx.params(w)?;
        match self {
            AttributeSource::Oracle => Ok(p.0.to_vec()),
            AttributeSource::Regressor(r) => Ok(r.predict(&render(&p, ctx.render)?)?.0),
        }
    }
}

/// Per-seed edits forcing the target to 0 (`set0`) and to 1 (`set1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OppositeSetPair {
    pub target: usize,
    pub seeds: Vec<u64>,
    pub originals: Vec<LatentCode>,
    pub strengths0: Vec<f64>,
    pub strengths1: Vec<f64>,
    pub set0: Vec<LatentCode>,
    pub set1: Vec<LatentCode>,
}

impl OppositeSetPair {
    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }
}

pub fn build_opposite_sets(
    t: &DirectionMatrix,
    target: usize,
    seeds: &[u64],
    source: AttributeSource,
    ctx: &EvalContext,
) -> Result<OppositeSetPair> {
    if target >= t.features() {
        return Err(Error::InvalidFeature { index: target, count: t.features() });
    }
    if seeds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = t.features();
    let mut pair = OppositeSetPair {
        target,
        seeds: seeds.to_vec(),
        originals: Vec::with_capacity(seeds.len()),
        strengths0: Vec::with_capacity(seeds.len()),
        strengths1: Vec::with_capacity(seeds.len()),
        set0: Vec::with_capacity(seeds.len()),
        set1: Vec::with_capacity(seeds.len()),
    };
    for &seed in seeds {
        let w = sample_latent(seed, t.dim());
        let a = source.attributes(ctx, &w)?[target];
        let s0 = ScalerVector::single(n, target, -a)?;
        let s1 = ScalerVector::single(n, target, 1.0 - a)?;
        pair.set0.push(apply_edit(&w, t, &s0)?);
        pair.set1.push(apply_edit(&w, t, &s1)?);
        pair.strengths0.push(s0.0[target]);
        pair.strengths1.push(s1.0[target]);
        pair.originals.push(w);
    }
    Ok(pair)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeTable {
    pub target: usize,
    /// Slots covered by `deltas` and `ratios`, ascending.
    pub slots: Vec<usize>,
    /// Mean absolute paired change per covered slot.
    pub deltas: Vec<f64>,
    /// `deltas / target_delta`.
    pub ratios: Vec<f64>,
    pub target_delta: f64,
}

impl ChangeTable {
    pub fn ratio(&self, slot: usize) -> Option<f64> {
        self.slots.iter().position(|&s| s == slot).map(|i| self.ratios[i])
    }

    pub fn mean_ratio(&self) -> f64 {
        self.ratios.iter().sum::<f64>() / self.ratios.len() as f64
    }
}

/// Change table from per-seed attribute vectors of the two sets.
pub fn change_table_from_attributes(target: usize, slots: &[usize], a0: &[Vec<f64>], a1: &[Vec<f64>]) -> Result<ChangeTable> {
    if a0.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if a0.len() != a1.len() {
        return Err(Error::DimensionMismatch { what: "opposite set length", expected: a0.len(), got: a1.len() });
    }
    let n = a0[0].len();
    if target >= n {
        return Err(Error::InvalidFeature { index: target, count: n });
    }
    if let Some(&bad) = slots.iter().find(|&&s| s >= n) {
        return Err(Error::InvalidFeature { index: bad, count: n });
    }
    let count = a0.len() as f64;
    let mean_delta = |f: usize| a0.iter().zip(a1).map(|(x, y)| (y[f] - x[f]).abs()).sum::<f64>() / count;
    let target_delta = mean_delta(target);
    if target_delta < MIN_TARGET_DELTA {
        return Err(Error::DegenerateEdit(target_delta));
    }
    let deltas: Vec<f64> = slots.iter().map(|&f| if f == target { target_delta } else { mean_delta(f) }).collect();
    let ratios = slots.iter().zip(&deltas).map(|(&f, d)| if f == target { 1.0 } else { d / target_delta }).collect();
    Ok(ChangeTable { target, slots: slots.to_vec(), deltas, ratios, target_delta })
}

fn set_attributes(pair: &OppositeSetPair, source: AttributeSource, ctx: &EvalContext) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let a0 = pair.set0.iter().map(|w| source.attributes(ctx, w)).collect::<Result<_>>()?;
    let a1 = pair.set1.iter().map(|w| source.attributes(ctx, w)).collect::<Result<_>>()?;
    Ok((a0, a1))
}

/// Change table over all slots.
pub fn change_table(pair: &OppositeSetPair, source: AttributeSource, ctx: &EvalContext) -> Result<ChangeTable> {
    let (a0, a1) = set_attributes(pair, source, ctx)?;
    let slots: Vec<usize> = (0..a0.first().map_or(0, Vec::len)).collect();
    change_table_from_attributes(pair.target, &slots, &a0, &a1)
}

/// Oracle change table restricted to the gesture slots.
pub fn gesture_table(pair: &OppositeSetPair, ctx: &EvalContext) -> Result<ChangeTable> {
    let (a0, a1) = set_attributes(pair, AttributeSource::Oracle, ctx)?;
    gesture_table_from_attributes(pair.target, &a0, &a1)
}

pub fn gesture_table_from_attributes(target: usize, a0: &[Vec<f64>], a1: &[Vec<f64>]) -> Result<ChangeTable> {
    let slots: Vec<usize> = Slot::gesture_slots().map(Slot::index).collect();
    change_table_from_attributes(target, &slots, a0, a1)
}

/// The `k` slots with the largest ratios, ties broken by ascending index.
pub fn top_k(table: &ChangeTable, k: usize) -> Result<Vec<usize>> {
    if k > table.slots.len() {
        return Err(Error::InvalidFeature { index: k, count: table.slots.len() });
    }
    let mut order: Vec<usize> = (0..table.slots.len()).collect();
    order.sort_by(|&a, &b| table.ratios[b].total_cmp(&table.ratios[a]).then(table.slots[a].cmp(&table.slots[b])));
    Ok(order.into_iter().take(k).map(|i| table.slots[i]).collect())
}

/// Declared emotion proxies, each in [0, 1].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmotionVector {
    pub happy: f64,
    pub surprised: f64,
    pub sad: f64,
    pub neutral: f64,
}

impl EmotionVector {
    pub const NAMES: [&'static str; 4] = ["happy", "surprised", "sad", "neutral"];

    pub fn as_array(&self) -> [f64; 4] {
        [self.happy, self.surprised, self.sad, self.neutral]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { happy: a[0], surprised: a[1], sad: a[2], neutral: a[3] }
    }
}

pub fn emotion_proxy(p: &SemanticParams) -> EmotionVector {
    let curve = p.get(Slot::MouthCurvature);
    let raise = p.get(Slot::BrowRaise);
    let surprised = (p.get(Slot::EyeOpenness) + p.get(Slot::MouthOpenness) + raise) / 3.0;
    let gestures: Vec<f64> = Slot::gesture_slots().map(|s| p.get(s)).collect();
    let deviation = gestures.iter().map(|g| (g - 0.5).abs()).sum::<f64>() / gestures.len() as f64;
    EmotionVector {
        happy: curve,
        surprised,
        sad: (1.0 - curve) * (1.0 - raise),
        neutral: (1.0 - 2.0 * deviation).clamp(0.0, 1.0),
    }
}

/// Per-emotion mean absolute paired change.
pub fn emotion_disturbance_from_params(p0: &[SemanticParams], p1: &[SemanticParams]) -> Result<EmotionVector> {
    if p0.len() != p1.len() {
        return Err(Error::DimensionMismatch { what: "opposite set length", expected: p0.len(), got: p1.len() });
    }
    if p0.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sum = [0.0; 4];
    for (a, b) in p0.iter().zip(p1) {
        let (ea, eb) = (emotion_proxy(a).as_array(), emotion_proxy(b).as_array());
        for k in 0..4 {
            sum[k] += (eb[k] - ea[k]).abs();
        }
    }
    Ok(EmotionVector::from_array(sum.map(|s| s / p0.len() as f64)))
}

fn set_params(pair: &OppositeSetPair, ctx: &EvalContext) -> Result<(Vec<SemanticParams>, Vec<SemanticParams>)> {
    let p0 = pair.set0.iter().map(|w| ctx.params(w)).collect::<Result<_>>()?;
    let p1 = pair.set1.iter().map(|w| ctx.params(w)).collect::<Result<_>>()?;
    Ok((p0, p1))
}

pub fn emotion_disturbance(pair: &OppositeSetPair, ctx: &EvalContext) -> Result<EmotionVector> {
    let (p0, p1) = set_params(pair, ctx)?;
    emotion_disturbance_from_params(&p0, &p1)
}

/// Mean Euclidean distance between corresponding landmarks, over all
/// pairs and landmarks.
pub fn landmark_displacement_from_sets(l0: &[LandmarkSet], l1: &[LandmarkSet]) -> Result<f64> {
    if l0.len() != l1.len() {
        return Err(Error::DimensionMismatch { what: "opposite set length", expected: l0.len(), got: l1.len() });
    }
    if l0.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (a, b) in l0.iter().zip(l1) {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { what: "landmark count", expected: a.len(), got: b.len() });
        }
        for (p, q) in a.points.iter().zip(&b.points) {
            let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
            sum += libm::sqrt(dx * dx + dy * dy);
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

pub fn landmark_displacement(pair: &OppositeSetPair, ctx: &EvalContext) -> Result<f64> {
    let (p0, p1) = set_params(pair, ctx)?;
    let l0 = p0.iter().map(analytic_landmarks).collect::<Result<Vec<_>>>()?;
    let l1 = p1.iter().map(analytic_landmarks).collect::<Result<Vec<_>>>()?;
    landmark_displacement_from_sets(&l0, &l1)
}

/// Mean absolute change of the gesture slots between two parameter sets.
pub fn gesture_drift(before: &SemanticParams, after: &SemanticParams) -> f64 {
    let g: Vec<f64> = Slot::gesture_slots().map(|s| (after.get(s) - before.get(s)).abs()).collect();
    g.iter().sum::<f64>() / g.len() as f64
}

/// All measurements for one (matrix, target) evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub target: usize,
    pub oracle: ChangeTable,
    pub regressor: Option<ChangeTable>,
    pub gestures: ChangeTable,
    pub emotions: EmotionVector,
    pub landmark_displacement: f64,
    pub top_k: Vec<usize>,
}

pub fn evaluate_target(
    t: &DirectionMatrix,
    target: usize,
    seeds: &[u64],
    regressor: Option<&Regressor>,
    ctx: &EvalContext,
    k: usize,
) -> Result<(TargetReport, OppositeSetPair)> {
    let pair = build_opposite_sets(t, target, seeds, AttributeSource::Oracle, ctx)?;
    let oracle = change_table(&pair, AttributeSource::Oracle, ctx)?;
    let regressor = regressor.map(|r| change_table(&pair, AttributeSource::Regressor(r), ctx)).transpose()?;
    let report = TargetReport {
        target,
        top_k: top_k(&oracle, k.min(SLOT_COUNT))?,
        gestures: gesture_table(&pair, ctx)?,
        emotions: emotion_disturbance(&pair, ctx)?,
        landmark_displacement: landmark_displacement(&pair, ctx)?,
        oracle,
        regressor,
    };
    Ok((report, pair))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_attrs(rng: &mut ChaCha8Rng, count: usize, n: usize) -> Vec<Vec<f64>> {
        (0..count).map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).collect()
    }

    fn rand_params(rng: &mut ChaCha8Rng) -> SemanticParams {
        SemanticParams(core::array::from_fn(|_| rng.gen_range(0.001..0.999)))
    }

    fn ctx_parts() -> (MixingMap, RenderConfig) {
        (MixingMap::from_seed(7, 12).unwrap(), RenderConfig { size: 16, steepness: 40.0 })
    }

    #[test]
    fn opposite_strengths_from_attribute() {
        let (m, r) = ctx_parts();
        let ctx = EvalContext { mixing: &m, render: &r };
        let t = DirectionMatrix::random(12, 12, 1.0, 1).unwrap();
        let seeds: Vec<u64> = (0..256).collect();
        let pair = build_opposite_sets(&t, 2, &seeds, AttributeSource::Oracle, &ctx).unwrap();
        assert_eq!((pair.set0.len(), pair.set1.len()), (256, 256));
        for i in 0..256 {
            assert_eq!(pair.originals[i], sample_latent(seeds[i], 12));
            let a = ctx.params(&pair.originals[i]).unwrap().0[2];
            assert_eq!(pair.strengths0[i], -a);
            assert_eq!(pair.strengths1[i], 1.0 - a);
        }
        assert!(matches!(build_opposite_sets(&t, 12, &seeds, AttributeSource::Oracle, &ctx), Err(Error::InvalidFeature { .. })));
        assert_eq!(build_opposite_sets(&t, 0, &[], AttributeSource::Oracle, &ctx), Err(Error::EmptyDataset));
    }

    #[test]
    fn zero_attribute_gives_zero_edit() {
        let (m, r) = ctx_parts();
        let t = DirectionMatrix::random(12, 12, 1.0, 1).unwrap();
        let w = sample_latent(3, 12);
        let a = 0.0;
        let s0 = ScalerVector::single(12, 0, -a).unwrap();
        let edited = apply_edit(&w, &t, &s0).unwrap();
        assert_eq!(edited, w);
        let p = latent_to_params(&w, &m).unwrap();
        assert_eq!(render(&latent_to_params(&edited, &m).unwrap(), &r).unwrap(), render(&p, &r).unwrap());
        assert_eq!(ScalerVector::single(12, 0, -0.5).unwrap().0[0], -0.5);
        assert_eq!(ScalerVector::single(12, 0, 1.0 - 0.5).unwrap().0[0], 0.5);
    }

    #[test]
    fn change_table_hand_example() {
        let a0 = alloc::vec![alloc::vec![0.1, 0.5, 0.3], alloc::vec![0.2, 0.4, 0.3]];
        let a1 = alloc::vec![alloc::vec![0.6, 0.7, 0.3], alloc::vec![0.5, 0.6, 0.1]];
        let t = change_table_from_attributes(0, &[0, 1, 2], &a0, &a1).unwrap();
        let d = |x: f64, y: f64| (y - x).abs();
        assert_eq!(t.deltas, alloc::vec![(d(0.1, 0.6) + d(0.2, 0.5)) / 2.0, (d(0.5, 0.7) + d(0.4, 0.6)) / 2.0, (d(0.3, 0.3) + d(0.3, 0.1)) / 2.0]);
        assert_eq!(t.ratios[0], 1.0);
        assert_eq!(t.ratios[1], t.deltas[1] / 0.4);
        let simple = change_table_from_attributes(0, &[0, 1], &[alloc::vec![0.0, 0.0]], &[alloc::vec![0.4, 0.2]]).unwrap();
        assert_eq!(simple.ratios, alloc::vec![1.0, 0.5]);
        assert!(matches!(change_table_from_attributes(0, &[0], &[alloc::vec![0.3]], &[alloc::vec![0.3]]), Err(Error::DegenerateEdit(_))));
    }

    #[test]
    fn change_and_gesture_tables_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for case in 0..10 {
            let count = 2 + case;
            let target = case % 6;
            let a0 = rand_attrs(&mut rng, count, 12);
            let a1 = rand_attrs(&mut rng, count, 12);
            let all: Vec<usize> = (0..12).collect();
            let table = change_table_from_attributes(target, &all, &a0, &a1).unwrap();
            let gest = gesture_table_from_attributes(target, &a0, &a1).unwrap();
            let mut deltas = [0.0; 12];
            for f in 0..12 {
                let mut s = 0.0;
                for i in 0..count {
                    s += (a1[i][f] - a0[i][f]).abs();
                }
                deltas[f] = s / count as f64;
            }
            for f in 0..12 {
                assert_eq!(table.deltas[f], deltas[f]);
                let ratio = if f == target { 1.0 } else { deltas[f] / deltas[target] };
                assert_eq!(table.ratios[f], ratio);
            }
            assert_eq!(gest.slots, alloc::vec![6, 7, 8, 9, 10, 11]);
            for (i, f) in (6..12).enumerate() {
                assert_eq!(gest.deltas[i], deltas[f]);
                assert_eq!(gest.ratios[i], deltas[f] / deltas[target]);
            }
            // top-k by selection: repeatedly take the largest ratio, lowest index on ties
            let mut remaining: Vec<usize> = (0..12).collect();
            let mut expected = Vec::new();
            for _ in 0..5 {
                let mut best = remaining[0];
                for &f in &remaining {
                    if table.ratios[f] > table.ratios[best] {
                        best = f;
                    }
                }
                expected.push(best);
                remaining.retain(|&f| f != best);
            }
            assert_eq!(top_k(&table, 5).unwrap(), expected);
        }
    }

    #[test]
    fn gesture_table_zero_when_only_appearance_changes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a0 = rand_attrs(&mut rng, 5, 12);
        let a1: Vec<Vec<f64>> = a0
            .iter()
            .map(|a| a.iter().enumerate().map(|(f, v)| if f < 6 { 1.0 - v } else { *v }).collect())
            .collect();
        let g = gesture_table_from_attributes(1, &a0, &a1).unwrap();
        assert!(g.ratios.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn top_k_cases() {
        let t = ChangeTable { target: 0, slots: alloc::vec![0, 1, 2], deltas: alloc::vec![1.0, 0.8, 0.55], ratios: alloc::vec![1.0, 0.8, 0.55], target_delta: 1.0 };
        assert_eq!(top_k(&t, 2).unwrap(), alloc::vec![0, 1]);
        let flat = ChangeTable { ratios: alloc::vec![0.3; 3], ..t.clone() };
        assert_eq!(top_k(&flat, 2).unwrap(), alloc::vec![0, 1]);
        assert!(top_k(&t, 4).is_err());
    }

    #[test]
    fn emotion_proxy_definitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let happy = SemanticParams::neutral().with(Slot::MouthCurvature, 1.0);
        assert_eq!(emotion_proxy(&happy).happy, 1.0);
        assert_eq!(emotion_proxy(&SemanticParams::neutral()).neutral, 1.0);
        for _ in 0..10 {
            let p = rand_params(&mut rng);
            let v = p.0;
            let e = emotion_proxy(&p);
            assert!((e.happy - v[7]).abs() < 1e-12);
            assert!((e.surprised - (v[6] + v[8] + v[11]) / 3.0).abs() < 1e-12);
            assert!((e.sad - (1.0 - v[7]) * (1.0 - v[11])).abs() < 1e-12);
            let mut dev = 0.0;
            for g in 6..12 {
                dev += (v[g] - 0.5).abs();
            }
            assert!((e.neutral - (1.0 - 2.0 * dev / 6.0).clamp(0.0, 1.0)).abs() < 1e-12);
            assert!(e.as_array().iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn emotion_disturbance_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p: Vec<SemanticParams> = (0..3).map(|_| rand_params(&mut rng)).collect();
        assert_eq!(emotion_disturbance_from_params(&p, &p).unwrap(), EmotionVector::default());
        for case in 0..10 {
            let count = 1 + case;
            let p0: Vec<SemanticParams> = (0..count).map(|_| rand_params(&mut rng)).collect();
            let p1: Vec<SemanticParams> = (0..count).map(|_| rand_params(&mut rng)).collect();
            let got = emotion_disturbance_from_params(&p0, &p1).unwrap().as_array();
            for k in 0..4 {
                let mut s = 0.0;
                for i in 0..count {
                    s += (emotion_proxy(&p1[i]).as_array()[k] - emotion_proxy(&p0[i]).as_array()[k]).abs();
                }
                assert_eq!(got[k], s / count as f64);
            }
        }
    }

    #[test]
    fn landmark_displacement_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let set = |rng: &mut ChaCha8Rng| LandmarkSet { points: (0..16).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect() };
        let a = set(&mut rng);
        assert_eq!(landmark_displacement_from_sets(&[a.clone()], &[a.clone()]).unwrap(), 0.0);
        let shifted = LandmarkSet { points: a.points.iter().map(|p| [p[0] + 0.1, p[1]]).collect() };
        assert!((landmark_displacement_from_sets(&[a.clone()], &[shifted]).unwrap() - 0.1).abs() < 1e-12);
        for case in 0..10 {
            let count = 1 + case;
            let l0: Vec<LandmarkSet> = (0..count).map(|_| set(&mut rng)).collect();
            let l1: Vec<LandmarkSet> = (0..count).map(|_| set(&mut rng)).collect();
            let mut s = 0.0;
            for i in 0..count {
                for k in 0..16 {
                    let dx = l1[i].points[k][0] - l0[i].points[k][0];
                    let dy = l1[i].points[k][1] - l0[i].points[k][1];
                    s += libm::sqrt(dx * dx + dy * dy);
                }
            }
            assert_eq!(landmark_displacement_from_sets(&l0, &l1).unwrap(), s / (16 * count) as f64);
        }
    }

    #[test]
    fn metrics_are_invariant_to_seed_order() {
        let (m, r) = ctx_parts();
        let ctx = EvalContext { mixing: &m, render: &r };
        let t = DirectionMatrix::random(12, 12, 0.8, 3).unwrap();
        let seeds: Vec<u64> = (10..30).collect();
        let mut rev = seeds.clone();
        rev.reverse();
        let a = evaluate_target(&t, 1, &seeds, None, &ctx, 3).unwrap().0;
        let b = evaluate_target(&t, 1, &rev, None, &ctx, 3).unwrap().0;
        for (x, y) in a.oracle.ratios.iter().zip(&b.oracle.ratios) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in a.emotions.as_array().iter().zip(b.emotions.as_array()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.landmark_displacement - b.landmark_displacement).abs() < 1e-12);
        assert_eq!(a.oracle.ratios[1], 1.0);
    }

    #[test]
    fn identical_sets_have_zero_disturbance() {
        let (m, r) = ctx_parts();
        let ctx = EvalContext { mixing: &m, render: &r };
        let seeds: Vec<u64> = (0..5).collect();
        let pair = build_opposite_sets(&DirectionMatrix::random(12, 12, 1.0, 2).unwrap(), 0, &seeds, AttributeSource::Oracle, &ctx).unwrap();
        let same = OppositeSetPair { set1: pair.set0.clone(), ..pair };
        assert_eq!(landmark_displacement(&same, &ctx).unwrap(), 0.0);
        assert_eq!(emotion_disturbance(&same, &ctx).unwrap(), EmotionVector::default());
        assert!(matches!(change_table(&same, AttributeSource::Oracle, &ctx), Err(Error::DegenerateEdit(_))));
    }
}
