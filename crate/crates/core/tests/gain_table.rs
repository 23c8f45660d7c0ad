use corpusforge_core::snr::GainTable;

/// Rewrites `data/wada_gain_table.tsv`; run with `--ignored` after changing
/// the model quadrature.
#[test]
#[ignore]
fn regenerate_gain_table() {
    let table = GainTable::generate(1.0).unwrap();
    let mut out = String::from(
        "# WADA amplitude statistic g = ln E|x| - E ln|x| for Gamma(0.4) speech plus\n\
         # Gaussian noise, evaluated by quadrature. Columns: snr_db, g\n",
    );
    for &(g, db) in table.points() {
        out.push_str(&format!("{db:.0}\t{g:.10}\n"));
    }
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/wada_gain_table.tsv");
    std::fs::write(path, out).unwrap();
}

#[test]
fn committed_table_matches_quadrature() {
    let generated = GainTable::generate(1.0).unwrap();
    let builtin = GainTable::builtin();
    assert_eq!(generated.points().len(), builtin.points().len());
    for (a, b) in generated.points().iter().zip(builtin.points()) {
        assert_eq!(a.1, b.1);
        assert!((a.0 - b.0).abs() < 1e-9, "{} dB: {} vs {}", a.1, a.0, b.0);
    }
}
