use super::calculus::{diff, Axis, DiffKind};
use super::{Field, LatticeValue};
use crate::error::{invalid, LatticeError, Result};

/// Fixed-order pairwise summation. The split points depend only on the
/// length, so the result is reproducible bit for bit.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Weighted lattice norm `(h² Σ_j |u_j|^p)^{1/p}`; `p = ∞` is the node-wise max.
pub fn lp_norm<T: LatticeValue>(field: &Field<T>, p: f64) -> Result<f64> {
    lp_norm_impl(field, p, None)
}

/// [`lp_norm`] restricted to nodes where `mask` is true.
pub fn lp_norm_masked<T: LatticeValue>(field: &Field<T>, p: f64, mask: &[bool]) -> Result<f64> {
    if mask.len() != field.spec().len() {
        return Err(LatticeError::IncompatibleGrids(format!(
            "mask has {} entries for {} nodes",
            mask.len(),
            field.spec().len()
        )));
    }
    lp_norm_impl(field, p, Some(mask))
}

fn lp_norm_impl<T: LatticeValue>(field: &Field<T>, p: f64, mask: Option<&[bool]>) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(invalid("p", format!("need p ≥ 1, got {p}")));
    }
    let keep = |k: usize| mask.map_or(true, |m| m[k]);
    let values = field.values();
    if p.is_infinite() {
        let mut m = 0.0_f64;
        for (k, v) in values.iter().enumerate() {
            if keep(k) {
                m = m.max(v.norm());
            }
        }
        return Ok(m);
    }
    let terms: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            if !keep(k) {
                0.0
            } else if p == 2.0 {
                v.norm_sq()
            } else {
                v.norm().powf(p)
            }
        })
        .collect();
    let area = field.spec().cell_area();
    Ok((area * pairwise_sum(&terms)).powf(1.0 / p))
}

/// `(u, v)_{L²_h} = h² Σ_j u_j·v_j`.
pub fn inner_l2h<T: LatticeValue>(u: &Field<T>, v: &Field<T>) -> Result<f64> {
    u.spec().ensure_same(v.spec())?;
    let terms: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a.dot(b)).collect();
    Ok(u.spec().cell_area() * pairwise_sum(&terms))
}

/// Difference multi-index `(α₁⁺, α₁⁻, α₂⁺, α₂⁻)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    pub forward: [u8; 2],
    pub backward: [u8; 2],
}

impl MultiIndex {
    pub const fn new(fx: u8, bx: u8, fy: u8, by: u8) -> Self {
        Self {
            forward: [fx, fy],
            backward: [bx, by],
        }
    }

    /// `|α| = Σᵢ (αᵢ⁺ + αᵢ⁻)`.
    pub fn order(&self) -> usize {
        (self.forward[0] + self.forward[1] + self.backward[0] + self.backward[1]) as usize
    }

    /// Every multi-index with `|α| = k`, in a fixed order.
    pub fn all_of_order(k: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let k = k as u8;
        for fx in 0..=k {
            for bx in 0..=k - fx {
                for fy in 0..=k - fx - bx {
                    let by = k - fx - bx - fy;
                    out.push(MultiIndex::new(fx, bx, fy, by));
                }
            }
        }
        out
    }

    /// `D^α u = Πᵢ D₊ᵢ^{αᵢ⁺} D₋ᵢ^{αᵢ⁻} u`.
    pub fn apply<T: LatticeValue>(&self, field: &Field<T>) -> Field<T> {
        let mut out = field.clone();
        for (i, axis) in Axis::BOTH.into_iter().enumerate() {
            for _ in 0..self.forward[i] {
                out = diff(&out, axis, DiffKind::Forward);
            }
            for _ in 0..self.backward[i] {
                out = diff(&out, axis, DiffKind::Backward);
            }
        }
        out
    }
}

/// `Σ_{|α|=1} ‖D^α u‖_{Lᵖ_h}`, the norm written `‖D¹u‖_p`.
pub fn grad_lp_norm<T: LatticeValue>(field: &Field<T>, p: f64) -> Result<f64> {
    sobolev_norm(field, 1, p, true)
}

/// Discrete Sobolev norm `Σ_{|α|≤k} ‖D^α u‖_{Lᵖ_h}`; the homogeneous variant
/// keeps only `|α| = k`. Supports `k ≤ 2`.
pub fn sobolev_norm<T: LatticeValue>(
    field: &Field<T>,
    k: usize,
    p: f64,
    homogeneous: bool,
) -> Result<f64> {
    if k > 2 {
        return Err(LatticeError::Unsupported(format!(
            "Sobolev order {k} (only k ≤ 2 is implemented)"
        )));
    }
    let orders: Vec<usize> = if homogeneous { vec![k] } else { (0..=k).collect() };
    let mut total = 0.0;
    for order in orders {
        for alpha in MultiIndex::all_of_order(order) {
            total += lp_norm(&alpha.apply(field), p)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, ScalarField};

    #[test]
    fn multi_index_counts() {
        assert_eq!(MultiIndex::all_of_order(0).len(), 1);
        assert_eq!(MultiIndex::all_of_order(1).len(), 4);
        assert_eq!(MultiIndex::all_of_order(2).len(), 10);
        assert!(MultiIndex::all_of_order(2).iter().all(|a| a.order() == 2));
    }

    #[test]
    fn zero_field_norms_vanish() {
        let spec = GridSpec::periodic(8, 0.5).unwrap();
        let u = ScalarField::zeros(spec);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_eq!(lp_norm(&u, p).unwrap(), 0.0);
        }
    }

    #[test]
    fn scaled_delta_has_unit_l1_norm() {
        let h = 0.125;
        let spec = GridSpec::periodic(8, h).unwrap();
        let u = ScalarField::from_fn(spec, |ix, iy| if ix == 3 && iy == 2 { 1.0 / (h * h) } else { 0.0 });
        assert!((lp_norm(&u, 1.0).unwrap() - 1.0).abs() < 1e-14);
        // L²_h of δ/h² is h^{-1}, not 1.
        assert!((lp_norm(&u, 2.0).unwrap() - 1.0 / h).abs() < 1e-12);
    }

    #[test]
    fn rejects_p_below_one() {
        let spec = GridSpec::periodic(4, 1.0).unwrap();
        assert!(lp_norm(&ScalarField::zeros(spec), 0.5).is_err());
    }

    #[test]
    fn sobolev_order_three_is_unsupported() {
        let spec = GridSpec::periodic(4, 1.0).unwrap();
        assert!(matches!(
            sobolev_norm(&ScalarField::zeros(spec), 3, 2.0, false),
            Err(LatticeError::Unsupported(_))
        ));
    }

    #[test]
    fn sobolev_order_zero_is_lp() {
        let spec = GridSpec::periodic(8, 0.3).unwrap();
        let u = ScalarField::from_fn(spec, |ix, iy| (ix * 3 + iy) as f64 * 0.1);
        let a = sobolev_norm(&u, 0, 3.0, false).unwrap();
        let b = lp_norm(&u, 3.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inner_product_rejects_mismatched_grids() {
        let a = ScalarField::zeros(GridSpec::periodic(4, 1.0).unwrap());
        let b = ScalarField::zeros(GridSpec::periodic(5, 1.0).unwrap());
        assert!(matches!(inner_l2h(&a, &b), Err(LatticeError::IncompatibleGrids(_))));
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let v: Vec<f64> = (0..300).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 300.0 * 299.0 / 2.0);
    }
}
