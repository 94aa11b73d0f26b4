use lattice_rewrite::codebook::{all_blocks, enumerate_codebook, CodeParams, ENUMERATION_CAP};
use lattice_rewrite::codec::{HashKey, Hashing, InfoWord, RewriteCode, Strategy};
use lattice_rewrite::lattice::{e8, fig1, validate_lattice, GeneratorMatrix};
use lattice_rewrite::memsim::{run_lifetime_trial, TrialOptions};
use lattice_rewrite::{Error, MemoryState, Rational};
use proptest::prelude::*;

fn code(generator: GeneratorMatrix, m: u64, d: Rational, key: u64) -> RewriteCode {
    let n = generator.dim();
    let lattice = validate_lattice(generator, m).unwrap();
    RewriteCode::new(lattice, CodeParams::from_d(n, m, d).unwrap(), Hashing::Keyed(HashKey(key))).unwrap()
}

/// Every encoded word appears in the independently enumerated codebook.
#[test]
fn encoder_agrees_with_enumeration() {
    let code = code(fig1(), 5, Rational::new(3, 2), 11);
    let book = enumerate_codebook(code.lattice(), code.params(), ENUMERATION_CAP).unwrap();
    let mut hit = 0;
    for block in all_blocks(code.params()) {
        for u0 in 0..5 {
            for u1 in 0..5 {
                match code.encode(&InfoWord(vec![u0, u1]), &block) {
                    Ok(cw) => {
                        assert!(book.iter().any(|p| p.x == cw.x), "{cw:?} not enumerated");
                        hit += 1;
                    }
                    Err(Error::Phantom(_)) => {}
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }
    assert_eq!(hit, book.len());
}

#[test]
fn memory_reads_back_every_write() {
    let code = code(e8(), 4, Rational::from_integer(3), 7);
    let mut mem = MemoryState::erased(code.params());
    let mut words = 0u64;
    loop {
        let u = InfoWord((0..8).map(|i| (words * 7 + i) % code.radices()[i as usize]).collect());
        let before = mem.cells.clone();
        match mem.write_word(&code, &u, Strategy::Neighbors) {
            Ok(_) => {
                assert!(mem.cells.iter().zip(&before).all(|(x, s)| x >= s));
                assert_eq!(code.decode(&mem.cells).unwrap().u, u);
                words += 1;
            }
            Err(Error::MemoryFull) => {
                assert_eq!(mem.cells, before);
                break;
            }
            Err(e) => panic!("{e}"),
        }
        assert!(words < 10_000);
    }
    assert!(words >= 3);
    assert_eq!(mem.write_count, words);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trials_are_verified_and_reproducible(seed in any::<u64>(), key in any::<u64>()) {
        let code = code(fig1(), 5, Rational::from_integer(2), key);
        let options = TrialOptions { strategy: Strategy::Neighbors, verify: true };
        let a = run_lifetime_trial(&code, seed, options).unwrap();
        let b = run_lifetime_trial(&code, seed, options).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.writes >= 2);
    }
}
