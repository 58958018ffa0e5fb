use rand::Rng;

use super::chain::Population;
use super::{mh_accept, MoveKind, MoveOutcome};

/// Upper cap on an all-exchange log-weight before normalization.
const LOG_WEIGHT_CAP: f64 = 700.0;

/// log of the stage-1 acceptance factor for swapping the states of chains l and r:
/// (f_r − f_l)(1/t_l − 1/t_r).
pub fn stage_one_log_ratio(f_l: f64, f_r: f64, t_l: f64, t_r: f64) -> f64 {
    (f_r - f_l) * (1.0 / t_l - 1.0 / t_r)
}

fn pair_from_index(k: usize, l_count: usize) -> (usize, usize) {
    let mut k = k;
    for l in 0..l_count {
        let row = l_count - 1 - l;
        if k < row {
            return (l, l + 1 + k);
        }
        k -= row;
    }
    unreachable!()
}

/// Delayed-rejection exchange: a random pair, then on rejection an adjacent pair.
pub fn dr_exchange<R: Rng + ?Sized>(pop: &mut Population, rng: &mut R) -> MoveOutcome {
    let n_chains = pop.len();
    let f = pop.log_posts();
    let t = pop.temperatures();
    let (l, r) = pair_from_index(rng.random_range(0..n_chains * (n_chains - 1) / 2), n_chains);
    let mut out = MoveOutcome::new(MoveKind::DrExchangeStage1, (l, Some(r)));
    out.proposals = 1;
    let a1 = stage_one_log_ratio(f[l], f[r], t[l], t[r]);
    if mh_accept(a1, rng, &mut out.nonfinite) {
        pop.swap_states(l, r);
        out.accepted = true;
        out.acceptances = 1;
        return out;
    }

    out.kind = MoveKind::DrExchangeStage2;
    let s = rng.random_range(0..n_chains - 1);
    out.chains_touched = (s, Some(s + 1));
    out.proposals = 2;
    let mut f2 = f.clone();
    f2.swap(s, s + 1);
    let alpha_back = stage_one_log_ratio(f2[l], f2[r], t[l], t[r]).min(0.0).exp();
    let alpha_fwd = a1.min(0.0).exp();
    let log_ratio = stage_one_log_ratio(f[s], f[s + 1], t[s], t[s + 1]) + (-alpha_back).ln_1p()
        - (-alpha_fwd).ln_1p();
    if mh_accept(log_ratio, rng, &mut out.nonfinite) {
        pop.swap_states(s, s + 1);
        out.accepted = true;
        out.acceptances = 1;
    }
    out
}

/// Unnormalized log-weights of all L(L−1)/2 swaps, ordered (0,1),(0,2),…,(L−2,L−1),
/// followed by the rejection outcome with weight 1.
pub fn all_exchange_log_weights(f: &[f64], t: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut w = Vec::with_capacity(n * (n - 1) / 2 + 1);
    for l in 0..n {
        for r in l + 1..n {
            let v = stage_one_log_ratio(f[l], f[r], t[l], t[r]);
            w.push(if v.is_nan() { f64::NEG_INFINITY } else { v.min(LOG_WEIGHT_CAP) });
        }
    }
    w.push(0.0);
    w
}

/// Draw one of the L(L−1)/2 swaps or rejection with probability proportional to its weight.
pub fn all_exchange<R: Rng + ?Sized>(pop: &mut Population, rng: &mut R) -> MoveOutcome {
    let n_chains = pop.len();
    let f = pop.log_posts();
    let t = pop.temperatures();
    let mut out = MoveOutcome::new(MoveKind::AllExchange, (0, None));
    out.proposals = 1;
    let lw = all_exchange_log_weights(&f, &t);
    let mx = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|v| (v - mx).exp()).collect();
    let z: f64 = w.iter().sum();
    let u: f64 = rng.random::<f64>() * z;
    let mut acc = 0.0;
    let mut pick = w.len() - 1;
    for (h, wi) in w.iter().enumerate() {
        acc += wi;
        if u < acc {
            pick = h;
            break;
        }
    }
    if pick + 1 < w.len() {
        let (l, r) = pair_from_index(pick, n_chains);
        pop.swap_states(l, r);
        out.accepted = true;
        out.acceptances = 1;
        out.chains_touched = (l, Some(r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_indexing_covers_upper_triangle() {
        let pairs: Vec<_> = (0..6).map(|k| pair_from_index(k, 4)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn stage_one_symmetry_and_limits() {
        let (fl, fr, tl, tr) = (-12.3, -10.1, 1.0, 4.0);
        assert_eq!(stage_one_log_ratio(fl, fr, tl, tr), stage_one_log_ratio(fr, fl, tr, tl));
        assert_eq!(stage_one_log_ratio(3.0, 3.0, 1.0, 4.0), 0.0);
        assert_eq!(stage_one_log_ratio(3.0, -50.0, 2.0, 2.0), 0.0);
    }

    #[test]
    fn all_exchange_weights_examples() {
        let w = all_exchange_log_weights(&[1.0, 1.0], &[1.0, 2.0]);
        assert_eq!(w, vec![0.0, 0.0]);
        let w = all_exchange_log_weights(&[2.0, 2.0, 2.0], &[1.0, 2.0, 4.0]);
        assert_eq!(w, vec![0.0; 4]);
        let w = all_exchange_log_weights(&[-1e6, 0.0], &[1.0, 2.0]);
        assert_eq!(w[0], 700.0);
    }
}
