//! Randomized strategy soak, heavier than the default suites. Ignored by
//! default; run with `cargo test -p shaketree --test soak -- --ignored`.
//! Prints its seed; set SOAK_SEED to reproduce a run.
use shaketree::exec::{hash_parallel_stored, hash_parallel_stream, hash_sequential, Input};
use shaketree::schedule::{Mode, ModeParams, Ratio};

#[test]
#[ignore]
fn soak_strategies() {
    use rand::{Rng, SeedableRng};
    let seed = std::env::var("SOAK_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap()
                .as_secs()
        });
    println!("soak seed {seed}");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<ModeParams> = vec![
        ModeParams::new(Mode::M1),
        ModeParams { lanes: Some(5), ..ModeParams::new(Mode::M2S) },
        ModeParams { lanes: Some(7), ..ModeParams::new(Mode::M2L) },
        ModeParams::new(Mode::M3),
        ModeParams { epsilon: Some(Ratio::new(1, 2).unwrap()), ..ModeParams::new(Mode::M4S) },
        ModeParams { epsilon: Some(Ratio::new(1, 4).unwrap()), ..ModeParams::new(Mode::M4S) },
        ModeParams { epsilon: Some(Ratio::new(2, 3).unwrap()), ..ModeParams::new(Mode::M5S) },
        ModeParams { base: Some(4), ..ModeParams::new(Mode::M6S) },
        ModeParams { height: Some(2), ..ModeParams::new(Mode::M4L) },
        ModeParams { height: Some(5), ..ModeParams::new(Mode::M4L) },
        ModeParams { height: Some(2), group_size: Some(3), ..ModeParams::new(Mode::M4L) },
        ModeParams { height: Some(2), group_size: Some(8), ..ModeParams::new(Mode::M4L) },
        ModeParams { base: Some(3), epsilon: Some(Ratio::new(3, 4).unwrap()), ..ModeParams::new(Mode::M5L) },
        ModeParams { base: Some(5), ..ModeParams::new(Mode::M6L) },
        ModeParams { fixed_arity: Some(2), ..ModeParams::new(Mode::Wc) },
        ModeParams { fixed_arity: Some(16), ..ModeParams::new(Mode::Wc) },
        ModeParams::new(Mode::B1),
        ModeParams::new(Mode::B2),
        ModeParams::new(Mode::B3),
    ];
    for case in 0..600 {
        let params = &pool[rng.gen_range(0..pool.len())];
        let len = rng.gen_range(0..300_000usize);
        let msg: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let d = rng.gen_range(1..=5);
        let p = rng.gen_range(1..=8usize);
        let seq = hash_sequential(params, Input::Bytes(&msg), None, d).unwrap();
        let par = hash_parallel_stored(params, &msg, p).unwrap();
        assert_eq!(par.report.digest, seq.report.digest, "case {case} mode {:?} len {len} d {d} p {p}", params.mode);
        assert_eq!(par.report.f_calls, seq.report.f_calls, "case {case}");
        if matches!(params.mode, Some(Mode::M3) | Some(Mode::M6L) | Some(Mode::Wc)) {
            let mut cur = std::io::Cursor::new(msg.clone());
            let st = hash_parallel_stream(params, &mut cur, p, rng.gen_range(1..=3)).unwrap();
            assert_eq!(st.report.digest, seq.report.digest, "case {case} stream");
        }
        // Reader path must agree with the bytes path.
        if params.mode.map(|m| m.is_live()).unwrap_or(false) {
            let mut cur = std::io::Cursor::new(msg.clone());
            let rd = hash_sequential(params, Input::Reader(&mut cur), None, d).unwrap();
            assert_eq!(rd.report.digest, seq.report.digest, "case {case} reader");
        }
    }
    println!("soak: 600 cases clean");
}
