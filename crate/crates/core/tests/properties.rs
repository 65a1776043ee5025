//! Property tests for the structural invariants: statements that must hold
//! for every input, not just for the fixtures in the unit tests.
//!
//! Several properties use lattice-valued samples (multiples of 1/8) so that
//! affine maps with dyadic coefficients stay exact in floating point; on
//! that subdomain order statistics are preserved exactly and the assertions
//! can be bitwise instead of approximate.

use panelks_core::dist::{cdgpr_cdf_transform, cdgpr_quantile, LatentDistSpec};
use panelks_core::hpj::{debiased_cdf, hpj_combine};
use panelks_core::kstest::{ks_statistic, validity_ratio, CellSummary};
use panelks_core::panel::{
    clean_panel, split_halves, Area, CleaningConfig, FirmSeries, PanelDataset, PanelObservation,
};
use panelks_core::prodfn::TripleEstimate;
use panelks_core::stats::{ecdf_le, ecdf_lt, sort_floats};
use proptest::prelude::*;

fn lattice_triples(area: Area, max_n: usize) -> impl Strategy<Value = Vec<TripleEstimate>> {
    prop::collection::vec((-800i32..800, -800i32..800, -800i32..800), 2..max_n).prop_map(
        move |points| {
            points
                .into_iter()
                .enumerate()
                .map(|(i, (a, b, c))| TripleEstimate {
                    firm_id: format!("F{i}"),
                    sector: "S1".into(),
                    area,
                    theta_full: a as f64 * 0.125,
                    theta_h1: b as f64 * 0.125,
                    theta_h2: c as f64 * 0.125,
                    tenure: 16,
                })
                .collect()
        },
    )
}

fn affine(triples: &[TripleEstimate], a: f64, b: f64) -> Vec<TripleEstimate> {
    triples
        .iter()
        .map(|t| TripleEstimate {
            theta_full: a * t.theta_full + b,
            theta_h1: a * t.theta_h1 + b,
            theta_h2: a * t.theta_h2 + b,
            ..t.clone()
        })
        .collect()
}

/// Independent sup computation: re-standardize from the public moments and
/// scan every candidate point with direct counting, no shared cursor state.
fn brute_force_statistic(
    a: &[TripleEstimate],
    sa: &CellSummary,
    b: &[TripleEstimate],
    sb: &CellSummary,
) -> f64 {
    let standardize = |ts: &[TripleEstimate], s: &CellSummary| {
        let z = |x: f64| (x - s.mean.value) / s.sd;
        (
            ts.iter().map(|t| z(t.theta_full)).collect::<Vec<f64>>(),
            ts.iter().map(|t| z(t.theta_h1)).collect::<Vec<f64>>(),
            ts.iter().map(|t| z(t.theta_h2)).collect::<Vec<f64>>(),
        )
    };
    let (af, a1, a2) = standardize(a, sa);
    let (bf, b1, b2) = standardize(b, sb);
    let mut grid: Vec<f64> =
        af.iter().chain(&a1).chain(&a2).chain(&bf).chain(&b1).chain(&b2).copied().collect();
    sort_floats(&mut grid);
    grid.dedup();

    let ordinate = |f: &[f64], h1: &[f64], h2: &[f64], n: f64, z: f64, strict: bool| {
        let frac = |xs: &[f64]| {
            xs.iter().filter(|&&x| if strict { x < z } else { x <= z }).count() as f64 / n
        };
        hpj_combine(frac(f), frac(h1), frac(h2))
    };
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut sup = 0.0f64;
    for &z in &grid {
        for strict in [true, false] {
            let d = ordinate(&af, &a1, &a2, na, z, strict)
                - ordinate(&bf, &b1, &b2, nb, z, strict);
            sup = sup.max(d.abs());
        }
    }
    sup
}

proptest! {
    #[test]
    fn combining_equal_components_is_the_identity(p in -1e12f64..1e12) {
        prop_assert_eq!(hpj_combine(p, p, p), p);
    }

    #[test]
    fn transform_is_a_cdf(
        mu in -10.0f64..10.0,
        sigma in 0.1f64..10.0,
        xi in 0.0f64..0.95,
        mut probes in prop::collection::vec(-50.0f64..50.0, 2..40),
    ) {
        let base = LatentDistSpec::standard_normal();
        probes.sort_by(f64::total_cmp);
        let mut prev = 0.0f64;
        for &t in &probes {
            let p = cdgpr_cdf_transform(|x| base.cdf(x), t, mu, sigma, xi).unwrap();
            prop_assert!((0.0..=1.0).contains(&p), "ordinate {p} outside [0, 1]");
            prop_assert!(p >= prev, "not monotone: {p} after {prev}");
            prev = p;
        }
    }

    #[test]
    fn quantile_inverts_the_transform(
        p in 0.01f64..0.99,
        mu in -5.0f64..5.0,
        sigma in 0.1f64..10.0,
        xi in 0.0f64..0.9,
        which in 0usize..3,
    ) {
        let base = match which {
            0 => LatentDistSpec::standard_normal(),
            1 => LatentDistSpec::Uniform { min: -2.0, max: 3.0 },
            _ => LatentDistSpec::LogNormal { log_mean: 0.0, log_sd: 0.5 },
        };
        let x = cdgpr_quantile(&base, p, mu, sigma, xi).unwrap();
        let back = cdgpr_cdf_transform(|v| base.cdf(v), x, mu, sigma, xi).unwrap();
        prop_assert!((back - p).abs() < 1e-6, "F(Q({p})) = {back}");
    }

    #[test]
    fn half_split_concatenates_back(tenure in 2usize..40) {
        let observations: Vec<PanelObservation> = (0..tenure)
            .map(|t| PanelObservation {
                firm_id: "F1".into(),
                year: 1990 + t as i32,
                sector: "S1".into(),
                area: Area::Amd,
                value_added: 1.0 + t as f64,
                capital: 2.0,
                labor: 3.0,
                employees: None,
                category: None,
            })
            .collect();
        let series = FirmSeries {
            firm_id: "F1".into(),
            sector: "S1".into(),
            area: Area::Amd,
            observations: observations.clone(),
        };
        let (h1, h2) = split_halves(&series).unwrap();
        prop_assert_eq!(h1.observations.len(), tenure / 2);
        prop_assert_eq!(h1.observations.len() + h2.observations.len(), tenure);
        let concat: Vec<PanelObservation> =
            h1.observations.iter().chain(&h2.observations).cloned().collect();
        prop_assert_eq!(concat, observations);
    }

    #[test]
    fn cleaning_conserves_records_and_is_idempotent(
        rows in prop::collection::vec(
            (
                0u8..8,
                2000i32..2004,
                prop::bool::ANY,
                prop::bool::ANY,
                -2.0f64..5.0,
                -2.0f64..5.0,
                -2.0f64..5.0,
                prop::option::of(0.0f64..200.0),
                prop::option::of(prop::bool::ANY),
            ),
            0..80,
        ),
    ) {
        let observations: Vec<PanelObservation> = rows
            .into_iter()
            .map(|(firm, year, excluded, amd, v, k, l, employees, category)| PanelObservation {
                firm_id: format!("F{firm}"),
                year,
                sector: if excluded { "drop" } else { "keep" }.into(),
                area: if amd { Area::Amd } else { Area::Bmd },
                value_added: v,
                capital: k,
                labor: l,
                employees,
                category: category.map(|c| if c { "a" } else { "b" }.into()),
            })
            .collect();
        let n = observations.len();
        let config = CleaningConfig {
            min_tenure: 2,
            excluded_sectors: ["drop".to_string()].into(),
            allowed_categories: Some(["a".to_string()].into()),
            max_employees: Some(100.0),
            ..CleaningConfig::default()
        };
        let (cleaned, report) = clean_panel(
            PanelDataset { observations, parse_failures: vec![] },
            &config,
        );
        prop_assert_eq!(report.input_records, n);
        prop_assert_eq!(report.retained_records + report.dropped_total(), n);
        prop_assert_eq!(cleaned.observations.len(), report.retained_records);

        let (again, second) = clean_panel(cleaned.clone(), &config);
        prop_assert_eq!(second.dropped_total(), 0);
        prop_assert_eq!(again.observations, cleaned.observations);
    }

    #[test]
    fn statistic_matches_brute_force_scan(
        a in lattice_triples(Area::Amd, 25),
        b in lattice_triples(Area::Bmd, 25),
    ) {
        let sa = CellSummary::from_triples("S1", Area::Amd, &a);
        let sb = CellSummary::from_triples("S1", Area::Bmd, &b);
        prop_assume!(sa.is_ok() && sb.is_ok());
        let (sa, sb) = (sa.unwrap(), sb.unwrap());
        let fast = ks_statistic(&sa, &sb);
        let slow = brute_force_statistic(&a, &sa, &b, &sb);
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn statistic_is_location_scale_invariant(
        a in lattice_triples(Area::Amd, 20),
        b in lattice_triples(Area::Bmd, 20),
        scale in 0.01f64..100.0,
        shift in -100.0f64..100.0,
    ) {
        let sa = CellSummary::from_triples("S1", Area::Amd, &a);
        let sb = CellSummary::from_triples("S1", Area::Bmd, &b);
        prop_assume!(sa.is_ok() && sb.is_ok());
        let t0 = ks_statistic(&sa.unwrap(), &sb.unwrap());

        // map one area only: the null is equality up to location and scale,
        // so the statistic must not move
        let a2 = affine(&a, scale, shift);
        let sa2 = CellSummary::from_triples("S1", Area::Amd, &a2).unwrap();
        let t1 = ks_statistic(&sa2, &CellSummary::from_triples("S1", Area::Bmd, &b).unwrap());
        prop_assert!((t0 - t1).abs() <= 1e-9, "{t0} vs {t1}");
    }

    #[test]
    fn validity_ratio_matches_its_formula(
        na in 1usize..100_000,
        nb in 1usize..100_000,
        t in 2usize..60,
    ) {
        let r = validity_ratio(na, nb, t).unwrap();
        let t4 = (t as f64).powi(4);
        prop_assert!((r * t4 - na.max(nb) as f64).abs() < 1e-6 * t4);
        prop_assert!(validity_ratio(na, nb, 1).is_err());
    }

    #[test]
    fn ecdf_mass_accounting(
        xs in prop::collection::vec(-100i32..100, 1..50),
        probe in -120i32..120,
    ) {
        let mut v: Vec<f64> = xs.iter().map(|&i| i as f64 * 0.5).collect();
        sort_floats(&mut v);
        let x = probe as f64 * 0.5;
        let (le, lt) = (ecdf_le(&v, x), ecdf_lt(&v, x));
        let at = v.iter().filter(|&&y| y == x).count() as f64 / v.len() as f64;
        prop_assert!((0.0..=1.0).contains(&le));
        prop_assert!(le >= lt);
        prop_assert!((le - lt - at).abs() < 1e-15);
    }

    #[test]
    fn combined_cdf_spans_zero_to_one(a in lattice_triples(Area::Amd, 30)) {
        let cdf = debiased_cdf(&a);
        let points = cdf.jump_points();
        let (lo, hi) = (points[0], *points.last().unwrap());
        prop_assert_eq!(cdf.eval_left(lo), 0.0);
        prop_assert_eq!(cdf.eval(hi), 1.0);
    }
}
