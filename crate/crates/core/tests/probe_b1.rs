//! Temporary diagnostic: locate the b1 defect.

use bergmanflow::asymptotics::b1_coefficient;
use bergmanflow::bergman::{bergman_rho, SectionBasis};
use bergmanflow::geometry::Mode;
use bergmanflow::potential::{ma_density, mu_of};
use bergmanflow::{GridP1, MeasureSetting, Weight};

#[test]
#[ignore]
fn probe_b1_locate() {
    let grid = GridP1::invariant(1200);
    let eps = 0.05;
    let psi = grid.field_from_modes(&[Mode { l: 2, m: 0, c: eps }]).unwrap();
    let w = Weight::new(&grid, 1, psi, 0.0).unwrap();
    let s = MeasureSetting::s0_from_ma(&grid, &Weight::reference(&grid, 1)).unwrap();
    let est = |k: u32| {
        let basis = SectionBasis::new(&grid, k, 1).unwrap();
        let rho = bergman_rho(&grid, &basis, &w, &s).unwrap();
        let mu = mu_of(&grid, &w, &s).unwrap();
        let ma = ma_density(&grid, &w).unwrap();
        rho.zip_map(&mu, |r, m| r * m)
            .unwrap()
            .zip_map(&ma, |rm, a| rm / a - k as f64)
            .unwrap()
    };
    let e64 = est(64);
    let e128 = est(128);
    let rich = e128.zip_map(&e64, |a, b| 2.0 * a - b).unwrap();
    let b1 = b1_coefficient(&grid, &w, &s).unwrap();
    let defect = rich.sub(&b1).unwrap();
    let n = grid.n_u();
    for &i in &[0usize, 2, 10, 50, n / 2, n - 50, n - 10, n - 3, n - 1] {
        println!(
            "u={:+.6}: e64={:+.5} e128={:+.5} rich={:+.5} b1={:+.5} defect={:+.3e}",
            grid.u_nodes()[i],
            e64.values()[i],
            e128.values()[i],
            rich.values()[i],
            b1.values()[i],
            defect.values()[i]
        );
    }
    let imax = (0..n).max_by(|&a, &b| defect.values()[a].abs().partial_cmp(&defect.values()[b].abs()).unwrap()).unwrap();
    println!("max defect at node {imax}, u={:+.8}", grid.u_nodes()[imax]);
}
