#![allow(dead_code)]

use llg_lattice::grid::{diff, inner_l2h, laplacian, lp_norm, Axis, DiffKind, GridSpec, ScalarField};
use rand::Rng;

pub fn random_field(spec: GridSpec, rng: &mut impl Rng) -> ScalarField {
    let values = (0..spec.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ScalarField::new(spec, values).unwrap()
}

fn l2(f: &ScalarField) -> f64 {
    lp_norm(f, 2.0).unwrap()
}

fn product(f: &ScalarField, g: &ScalarField) -> ScalarField {
    f.zip_map(g, |a, b| a * b).unwrap()
}

/// `|(D₊f, g) + (f, D₋g)|` relative to the sizes of both pairings.
pub fn summation_by_parts_defect(f: &ScalarField, g: &ScalarField, axis: Axis) -> f64 {
    let df = diff(f, axis, DiffKind::Forward);
    let dg = diff(g, axis, DiffKind::Backward);
    let lhs = inner_l2h(&df, g).unwrap();
    let rhs = -inner_l2h(f, &dg).unwrap();
    (lhs - rhs).abs() / (l2(&df) * l2(g) + l2(f) * l2(&dg))
}

/// `D₊(fg) − (D₊f)·S₊g − f·D₊g`, node-wise max relative to the terms.
pub fn product_rule_defect(f: &ScalarField, g: &ScalarField, axis: Axis) -> f64 {
    let (sx, sy) = match axis {
        Axis::X => (1, 0),
        Axis::Y => (0, 1),
    };
    let d_fg = diff(&product(f, g), axis, DiffKind::Forward);
    let a = product(&diff(f, axis, DiffKind::Forward), &g.shifted(sx, sy));
    let b = product(f, &diff(g, axis, DiffKind::Forward));
    let err = d_fg.sub(&a).unwrap().sub(&b).unwrap().max_norm();
    err / (a.max_norm() + b.max_norm())
}

/// Largest defect of `D_a^σ D_b^τ = D_b^τ D_a^σ` over axes and kinds.
pub fn commutation_defect(f: &ScalarField) -> f64 {
    let kinds = [DiffKind::Forward, DiffKind::Backward];
    let mut worst = 0.0_f64;
    for a in Axis::BOTH {
        for b in Axis::BOTH {
            for ka in kinds {
                for kb in kinds {
                    let ab = diff(&diff(f, b, kb), a, ka);
                    let ba = diff(&diff(f, a, ka), b, kb);
                    let scale = ab.max_norm().max(ba.max_norm()).max(f64::MIN_POSITIVE);
                    worst = worst.max(ab.sub(&ba).unwrap().max_norm() / scale);
                }
            }
        }
    }
    worst
}

/// `|(Δf, g) − (f, Δg)|` relative to the sizes of both pairings.
pub fn laplacian_symmetry_defect(f: &ScalarField, g: &ScalarField) -> f64 {
    let lf = laplacian(f);
    let lg = laplacian(g);
    let lhs = inner_l2h(&lf, g).unwrap();
    let rhs = inner_l2h(f, &lg).unwrap();
    (lhs - rhs).abs() / (l2(&lf) * l2(g) + l2(f) * l2(&lg))
}

/// Largest of the four calculus defects for one pair of fields.
pub fn calculus_defect(f: &ScalarField, g: &ScalarField) -> f64 {
    let mut worst = commutation_defect(f).max(laplacian_symmetry_defect(f, g));
    for axis in Axis::BOTH {
        worst = worst
            .max(summation_by_parts_defect(f, g, axis))
            .max(product_rule_defect(f, g, axis));
    }
    worst
}
