//! Verify the structural axioms of the interaction energy density for each
//! potential family: nonnegativity with zeros exactly at the two ground
//! states, nondegenerate transverse Hessians there, quadratic growth at
//! infinity, and a sign-definite coupling term. Every wall-existence and
//! stability statement downstream leans on these properties, so they are
//! checked by randomized sampling plus closed-form inspection rather than
//! assumed.

use wallforge::model::{PotentialKind, PotentialSpec};

fn main() {
    let kinds = [
        ("symmetric cubic, gamma=1.5", PotentialKind::SymmetricCubic { gamma: 1.5 }),
        ("symmetric cubic, gamma=3", PotentialKind::SymmetricCubic { gamma: 3.0 }),
        ("symmetric cubic, gamma=5", PotentialKind::SymmetricCubic { gamma: 5.0 }),
        ("general cubic", PotentialKind::GeneralCubic { g11: 1.2, g22: 0.8, g12: 2.0, mu: 1.0 }),
        ("quartic, gamma=2", PotentialKind::Quartic { gamma: 2.0 }),
    ];

    for (label, kind) in kinds {
        let spec = PotentialSpec::new(kind).expect("admissible parameters");
        let box_hi = [
            (2.0 * spec.a_state()[0]).max(2.0),
            (2.0 * spec.b_state()[1]).max(2.0),
        ];
        let ax = spec.check_w_axioms(box_hi, 20_000).expect("axiom battery runs");
        println!("{label}");
        println!("  min W sampled          {:.3e} (zeros only at equilibria: {})",
            ax.min_w_sampled, ax.zeros_only_at_equilibria);
        println!("  transverse Hessians    a-state {:?}, b-state {:?}", ax.hess_a_eigs, ax.hess_b_eigs);
        println!("  transverse order       {} (quartic coefficient {:?})",
            ax.min_transverse_order, ax.quartic_transverse_coeff);
        println!("  growth                 W >= {:.4} |u|^2 for |u| >= {:.2}", ax.growth_c0, ax.growth_r0);
        println!("  coupling term range    [{:.4}, {:.4}], sign fixed: {}",
            ax.min_f12, ax.max_f12, ax.f12_sign_closed_form);
        println!("  pass                   {}\n", ax.pass);
    }

    // Inadmissible parameters are rejected with the violated rule named.
    let err = PotentialSpec::new(PotentialKind::SymmetricCubic { gamma: 0.5 })
        .expect_err("gamma = 0.5 is below the immiscibility threshold");
    println!("rejected as expected: {err}");
    let err = PotentialSpec::new(PotentialKind::GeneralCubic { g11: 1.0, g22: 1.0, g12: 0.9, mu: 1.0 })
        .expect_err("g12 <= sqrt(g11 g22) is miscible");
    println!("rejected as expected: {err}");
}
