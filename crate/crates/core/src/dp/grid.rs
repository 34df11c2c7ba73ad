//! Two-sided grid recursion for `J(+-, i, j, lambda)` with `lambda` on `{0, 1/M, ..., 1}`.

use rayon::prelude::*;

use super::checkpoint::{checkpoint_path, checkpoint_save, latest_checkpoint};
use super::slice::{SliceData, ValueSlice};
use super::{payoff_shortfall, CheckpointPolicy, DpConfig, LambdaRounding, Precision};
use crate::digest::InstanceHasher;
use crate::error::{CheckpointError, Error, Result};
use crate::kernel::physical_kernel_unchecked;
use crate::model::{Instance, LatticeSpec, NodeState};

/// Content hash of everything that determines a grid run's values.
pub fn instance_digest(inst: &Instance, cfg: &DpConfig) -> [u8; 32] {
    let p = &inst.params;
    InstanceHasher::new()
        .tag("shortfall-dp-grid")
        .f64(p.mu)
        .f64(p.kappa)
        .f64(p.theta)
        .f64(p.sigma)
        .f64(p.rho)
        .f64(p.s0)
        .f64(p.nu0)
        .f64(p.maturity)
        .f64(p.strike)
        .f64(inst.bounds.sigma_lo)
        .f64(inst.bounds.sigma_hi)
        .u64(inst.lattice.n as u64)
        .f64(inst.lattice.sigma_tilde)
        .u64(cfg.m as u64)
        .tag(cfg.projection.label())
        .tag(cfg.bound.label())
        .u64(cfg.rounding() as u64)
        .u64(match cfg.precision {
            Precision::F64 => 8,
            Precision::F32 => 4,
        })
        .finish()
}

/// Per-`lambda` admissible controls and the grid index reached after an up move.
struct ControlTable {
    /// `offsets[l]..offsets[l + 1]` indexes `up` for controls `c = 0..=cmax(l)`.
    offsets: Vec<usize>,
    up: Vec<u32>,
}

impl ControlTable {
    fn new(m: usize, exp_up: f64, exp_down: f64, rounding: LambdaRounding) -> Self {
        let mut offsets = Vec::with_capacity(m + 2);
        let mut up = Vec::new();
        offsets.push(0);
        for l in 0..=m {
            let lf = l as f64;
            // grid points not above min(1, lambda (1 + e^a)), in units of 1/M
            let cmax = ((lf * (1.0 + exp_up)).floor() as usize).min(m);
            for c in 0..=cmax {
                // M * (lambda (1 + e^{-a}) - c e^{-a}), written so that c == l is exact
                let inner = (lf + (lf - c as f64) * exp_down).max(0.0);
                let idx = match rounding {
                    LambdaRounding::Floor => inner.floor(),
                    LambdaRounding::CeilPlus => inner.ceil() + 1.0,
                    LambdaRounding::Ceil => inner.ceil(),
                    LambdaRounding::Exact => unreachable!("grid programs round"),
                };
                up.push((idx as usize).min(m) as u32);
            }
            offsets.push(up.len());
        }
        Self { offsets, up }
    }

    fn pairs(&self) -> usize {
        self.up.len()
    }
}

trait Store: Copy + Send + Sync + 'static {
    fn load(self) -> f64;
    fn store(x: f64) -> Self;
    fn wrap(v: Vec<Self>) -> SliceData;
    fn unwrap(d: SliceData) -> Option<Vec<Self>>;
}

impl Store for f64 {
    #[inline]
    fn load(self) -> f64 {
        self
    }
    #[inline]
    fn store(x: f64) -> Self {
        x
    }
    fn wrap(v: Vec<Self>) -> SliceData {
        SliceData::F64(v)
    }
    fn unwrap(d: SliceData) -> Option<Vec<Self>> {
        match d {
            SliceData::F64(v) => Some(v),
            SliceData::F32(_) => None,
        }
    }
}

impl Store for f32 {
    #[inline]
    fn load(self) -> f64 {
        self as f64
    }
    #[inline]
    fn store(x: f64) -> Self {
        x as f32
    }
    fn wrap(v: Vec<Self>) -> SliceData {
        SliceData::F32(v)
    }
    fn unwrap(d: SliceData) -> Option<Vec<Self>> {
        match d {
            SliceData::F32(v) => Some(v),
            SliceData::F64(_) => None,
        }
    }
}

fn terminal<S: Store>(inst: &Instance, m: usize) -> Vec<S> {
    let n = inst.n();
    let w = LatticeSpec::width(n);
    let strike = inst.params.strike;
    let mut out = Vec::with_capacity(w * w * (m + 1));
    for r in 0..w {
        let s = inst.price(r as i32 - n as i32);
        let column: Vec<S> = (0..=m)
            .map(|l| S::store(payoff_shortfall(l as f64 / m as f64 * s, s, strike)))
            .collect();
        for _ in 0..w {
            out.extend_from_slice(&column);
        }
    }
    out
}

/// Runs the grid recursion from the terminal condition down to `k = 0`.
pub fn dp_grid(inst: &Instance, cfg: &DpConfig) -> Result<ValueSlice> {
    dp_grid_until(inst, cfg, 0)
}

/// Runs the recursion from the terminal condition down to step `stop_k` only.
pub fn dp_grid_until(inst: &Instance, cfg: &DpConfig, stop_k: usize) -> Result<ValueSlice> {
    if cfg.m == 0 {
        return Err(Error::Precondition("control grid needs M >= 1".into()));
    }
    let digest = instance_digest(inst, cfg);
    let data = match cfg.precision {
        Precision::F64 => SliceData::F64(terminal::<f64>(inst, cfg.m)),
        Precision::F32 => SliceData::F32(terminal::<f32>(inst, cfg.m)),
    };
    let start = ValueSlice {
        n: inst.n(),
        k: inst.n(),
        bound: cfg.bound,
        m: cfg.m,
        data,
        digest,
    };
    maybe_checkpoint(&start, cfg, inst.n())?;
    backward(inst, cfg, start, stop_k)
}

/// Continues a run from an intermediate slice (for example one read from a checkpoint).
pub fn dp_grid_from(inst: &Instance, cfg: &DpConfig, start: ValueSlice) -> Result<ValueSlice> {
    if start.digest != instance_digest(inst, cfg) {
        return Err(CheckpointError::DigestMismatch.into());
    }
    if start.k > inst.n() || start.data.len() != ValueSlice::expected_len(start.k, cfg.m) {
        return Err(CheckpointError::BadHeader("slice shape does not match instance").into());
    }
    backward(inst, cfg, start, 0)
}

/// Resumes from the most advanced checkpoint in the configured directory.
pub fn resume_dp_grid(inst: &Instance, cfg: &DpConfig) -> Result<ValueSlice> {
    let CheckpointPolicy::Every { dir, .. } = &cfg.checkpoint else {
        return Err(Error::Precondition(
            "resume requires a checkpoint directory".into(),
        ));
    };
    let path = latest_checkpoint(dir, cfg.bound)?
        .ok_or_else(|| CheckpointError::Missing(dir.clone()))?;
    let slice = super::checkpoint::checkpoint_load(&path, &instance_digest(inst, cfg), None)?;
    dp_grid_from(inst, cfg, slice)
}

fn maybe_checkpoint(slice: &ValueSlice, cfg: &DpConfig, n: usize) -> Result<()> {
    if let CheckpointPolicy::Every { dir, stride } = &cfg.checkpoint {
        let stride = (*stride).max(1);
        if (n - slice.k).is_multiple_of(stride) || slice.k == 0 {
            let previous = latest_checkpoint(dir, cfg.bound)?;
            checkpoint_save(slice, &checkpoint_path(dir, slice.bound, slice.k))?;
            if let Some(prev) = previous {
                if prev != checkpoint_path(dir, slice.bound, slice.k) {
                    std::fs::remove_file(&prev).map_err(|source| CheckpointError::Io {
                        path: prev.clone(),
                        source,
                    })?;
                }
            }
        }
    }
    Ok(())
}

fn backward(inst: &Instance, cfg: &DpConfig, start: ValueSlice, stop_k: usize) -> Result<ValueSlice> {
    match cfg.precision {
        Precision::F64 => backward_typed::<f64>(inst, cfg, start, stop_k),
        Precision::F32 => backward_typed::<f32>(inst, cfg, start, stop_k),
    }
}

fn backward_typed<S: Store>(
    inst: &Instance,
    cfg: &DpConfig,
    start: ValueSlice,
    stop_k: usize,
) -> Result<ValueSlice> {
    let m = cfg.m;
    let mp = m + 1;
    let spec = &inst.lattice;
    let table = ControlTable::new(m, spec.exp_up, spec.exp_down, cfg.rounding());
    let digest = start.digest;
    let mut k_next = start.k;
    let mut prev: Vec<S> = S::unwrap(start.data)
        .ok_or(CheckpointError::BadHeader("slice precision does not match config"))?;

    while k_next > stop_k {
        let k = k_next - 1;
        let w = LatticeSpec::width(k);
        let w1 = LatticeSpec::width(k + 1);
        let ki = k as i32;
        let mut next: Vec<S> = vec![S::store(0.0); w * w * mp];
        let prev_ref = &prev;
        let table = &table;
        next.par_chunks_mut(w * mp)
            .enumerate()
            .try_for_each(|(r, row)| -> Result<()> {
                let i = r as i32 - ki;
                let mut h = vec![0.0f64; 3 * mp];
                for (c, out) in row.chunks_mut(mp).enumerate() {
                    let j = c as i32 - ki;
                    let ker = physical_kernel_unchecked(
                        inst,
                        NodeState { k, i, j },
                        cfg.projection,
                    )?;
                    let py = ker.xihat.as_array();
                    // H(xi, l') = sum_xihat p(xihat) J_{k+1}(i + xi, j + xihat, l'),
                    // successors of (i, j) sit at rows r..r+2 and columns c..c+2 of k+1
                    for dx in 0..3 {
                        let hx = &mut h[dx * mp..(dx + 1) * mp];
                        let base = ((r + dx) * w1 + c) * mp;
                        let s0 = &prev_ref[base..base + mp];
                        let s1 = &prev_ref[base + mp..base + 2 * mp];
                        let s2 = &prev_ref[base + 2 * mp..base + 3 * mp];
                        for l in 0..mp {
                            hx[l] = py[0] * s0[l].load() + py[1] * s1[l].load()
                                + py[2] * s2[l].load();
                        }
                    }
                    let [pd, pm, pu] = ker.xi.as_array();
                    let (hd, rest) = h.split_at(mp);
                    let (h0, hu) = rest.split_at(mp);
                    for l in 0..mp {
                        let mid = pm * h0[l];
                        let ups = &table.up[table.offsets[l]..table.offsets[l + 1]];
                        let mut best = f64::NEG_INFINITY;
                        for (cidx, &u) in ups.iter().enumerate() {
                            let v = pd * hd[cidx] + mid + pu * hu[u as usize];
                            if v > best {
                                best = v;
                            }
                        }
                        out[l] = S::store(best);
                    }
                }
                Ok(())
            })?;
        prev = next;
        k_next = k;
        let needs_slice = matches!(cfg.checkpoint, CheckpointPolicy::Every { .. });
        if needs_slice {
            let slice = ValueSlice {
                n: inst.n(),
                k,
                bound: cfg.bound,
                m,
                data: S::wrap(prev),
                digest,
            };
            maybe_checkpoint(&slice, cfg, inst.n())?;
            prev = S::unwrap(slice.data).expect("same precision");
        }
    }
    Ok(ValueSlice {
        n: inst.n(),
        k: k_next,
        bound: cfg.bound,
        m,
        data: S::wrap(prev),
        digest,
    })
}

/// Size of a grid run, for dry runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DpCost {
    /// `sum_k (2k+1)^2` lattice nodes.
    pub nodes: u128,
    /// Stored values over all steps: `nodes * (M + 1)`.
    pub states: u128,
    /// Inner-loop multiply-adds: `9 (M+1)` for the successor sums plus `3` per
    /// admissible `(lambda, c)` pair, over all non-terminal nodes.
    pub ops: u128,
    /// Bytes of the two largest live slices.
    pub peak_bytes: u128,
}

pub fn estimate_cost(inst: &Instance, m: usize, precision: Precision) -> DpCost {
    let spec = &inst.lattice;
    let table = ControlTable::new(m.max(1), spec.exp_up, spec.exp_down, LambdaRounding::Floor);
    let nodes = spec.state_count();
    let mp = (m + 1) as u128;
    let inner: u128 = (0..spec.n as u128).map(|k| (2 * k + 1) * (2 * k + 1)).sum();
    let per_node = 9 * mp + 3 * table.pairs() as u128;
    let bytes = match precision {
        Precision::F64 => 8,
        Precision::F32 => 4,
    };
    let wn = LatticeSpec::width(spec.n) as u128;
    let wn1 = LatticeSpec::width(spec.n.saturating_sub(1)) as u128;
    DpCost {
        nodes,
        states: nodes * mp,
        ops: inner * per_node,
        peak_bytes: (wn * wn + wn1 * wn1) * mp * bytes,
    }
}
