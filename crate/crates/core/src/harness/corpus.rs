//! Bundled benchmark pairs.
//!
//! Each pair couples a basic program with a known crashing input and a
//! target that links the same library code. Ground truth is either
//! `Triggered` (the target can crash in the vulnerable function) or
//! `NotReached` (the vulnerable function is not reachable in the target).

use std::sync::{Arc, OnceLock};

use crate::model::{FunctionId, VerdictKind};

use super::programs::{
    self, ACTION_MAGIC, COD, COD_KEY, NORMAL_KEY, SIZ, SIZ_KEY, SOD, SOT, STRIP_KEY, TAG_NORMAL,
    TAG_SUBIFD, TILE_KEY,
};
use super::TargetProgram;

#[derive(Debug)]
pub struct BenchmarkPair {
    pub id: &'static str,
    pub summary: &'static str,
    pub basic: Arc<TargetProgram>,
    pub target: Arc<TargetProgram>,
    pub poc: Vec<u8>,
    /// Vulnerable function in the basic program.
    pub vulnerable: FunctionId,
    pub expected: VerdictKind,
    /// Initial fuzzing seeds for the target: empty or simple well-formed
    /// files, never the basic POC.
    pub seeds: Vec<Vec<u8>>,
}

impl BenchmarkPair {
    /// The vulnerable function re-homed in the target program.
    pub fn target_vulnerable(&self) -> FunctionId {
        self.vulnerable.in_program(self.target.id())
    }

    /// True when the pair's basic and target consume input differently.
    pub fn cross_format(&self) -> bool {
        self.basic.convention() != self.target.convention()
    }
}

struct Registry {
    programs: Vec<Arc<TargetProgram>>,
    pairs: Vec<BenchmarkPair>,
}

fn registry() -> &'static Registry {
    static REG: OnceLock<Registry> = OnceLock::new();
    REG.get_or_init(build_registry)
}

/// All bundled pairs, in stable order.
pub fn corpus() -> &'static [BenchmarkPair] {
    &registry().pairs
}

/// All bundled programs, in stable order.
pub fn programs() -> &'static [Arc<TargetProgram>] {
    &registry().programs
}

pub fn find_pair(id: &str) -> Option<&'static BenchmarkPair> {
    corpus().iter().find(|p| p.id == id)
}

pub fn find_program(id: &str) -> Option<&'static Arc<TargetProgram>> {
    programs().iter().find(|p| p.id() == id)
}

fn build_registry() -> Registry {
    let cxxfilt = Arc::new(programs::cxxfilt());
    let nm_new = Arc::new(programs::nm_new());
    let objdump = Arc::new(programs::objdump());
    let size = Arc::new(programs::size());
    let swftophp = Arc::new(programs::swftophp());
    let listswf = Arc::new(programs::listswf());
    let tiffsplit = Arc::new(programs::tiffsplit());
    let thumbnail = Arc::new(programs::thumbnail());
    let tiffcrop = Arc::new(programs::tiffcrop());
    let opj_decompress = Arc::new(programs::opj_decompress());
    let opj_dump = Arc::new(programs::opj_dump());

    let tiff_poc = vec![TAG_NORMAL, NORMAL_KEY, STRIP_KEY, 0xee];

    let pairs = vec![
        BenchmarkPair {
            id: "demangle-suite",
            summary:
                "argument-string demangler reused by a symbol lister with two demangling call sites",
            basic: cxxfilt.clone(),
            target: nm_new.clone(),
            poc: b"_ZN3fooBt9".to_vec(),
            vulnerable: cxxfilt.function("register_btype"),
            expected: VerdictKind::Triggered,
            seeds: vec![b"-C foo".to_vec(), b"bar".to_vec()],
        },
        BenchmarkPair {
            id: "objdump-container",
            summary:
                "argument-string demangler reused by an object dumper reading a container file",
            basic: cxxfilt.clone(),
            target: objdump.clone(),
            poc: b"__t9999".to_vec(),
            vulnerable: cxxfilt.function("string_appendn"),
            expected: VerdictKind::Triggered,
            seeds: vec![
                b"OBJ\x01\x04\x01\x03foo".to_vec(),
                b"OBJ\x01\x03\x00".to_vec(),
            ],
        },
        BenchmarkPair {
            id: "magic-guard",
            summary: "action decoder guarded by a four-byte magic compared in one piece",
            basic: swftophp.clone(),
            target: listswf.clone(),
            poc: [ACTION_MAGIC, &[0x96, 0xf0]].concat(),
            vulnerable: swftophp.function("d_print_comp"),
            expected: VerdictKind::Triggered,
            seeds: vec![b"LSW\x02\x10\x06AAAAAA\x01\x01x".to_vec()],
        },
        BenchmarkPair {
            id: "multi-path",
            summary:
                "directory parser where only one of three static paths to the accessor crashes",
            basic: tiffsplit.clone(),
            target: thumbnail.clone(),
            poc: tiff_poc.clone(),
            vulnerable: tiffsplit.function("tiff_vget_field"),
            expected: VerdictKind::Triggered,
            seeds: vec![
                b"II*\x02\x05\x00\x00\x00\x60\x00\x00\x00".to_vec(),
                b"II*\x00".to_vec(),
            ],
        },
        BenchmarkPair {
            id: "decoy-path",
            summary:
                "codestream decoder whose dumper reaches the vulnerable function without validation",
            basic: opj_decompress.clone(),
            target: opj_dump.clone(),
            poc: vec![
                0xff, SIZ, SIZ_KEY, 0xff, COD, COD_KEY, 0xff, SOT, TILE_KEY, 0xe5,
            ],
            vulnerable: opj_decompress.function("opj_t1_decode_cblk"),
            expected: VerdictKind::Triggered,
            seeds: vec![
                vec![
                    b'j', b'P', 0x00, 0xff, SIZ, 0x00, 0xff, SOD, 0x00, 0x00, 0xff, SOD, 0x00, 0x00,
                ],
                b"jPq\x00\x00\x00\x00".to_vec(),
            ],
        },
        BenchmarkPair {
            id: "uncalled-vuln",
            summary: "size printer that links the demangler but never calls it",
            basic: cxxfilt.clone(),
            target: size.clone(),
            poc: b"_ZN3fooBt9".to_vec(),
            vulnerable: cxxfilt.function("register_btype"),
            expected: VerdictKind::NotReached,
            seeds: vec![b"OBJ\x01\x02\x10\x20".to_vec()],
        },
        BenchmarkPair {
            id: "hardcoded-critical",
            summary: "cropping tool built with the critical field mode hard-coded off",
            basic: tiffsplit.clone(),
            target: tiffcrop.clone(),
            poc: tiff_poc,
            vulnerable: tiffsplit.function("tiff_vget_field"),
            expected: VerdictKind::NotReached,
            seeds: vec![vec![b'I', b'I', b'*', 0x01, TAG_SUBIFD, 0x00, 0x00, 0x00]],
        },
    ];

    Registry {
        programs: vec![
            cxxfilt,
            nm_new,
            objdump,
            size,
            swftophp,
            listswf,
            tiffsplit,
            thumbnail,
            tiffcrop,
            opj_decompress,
            opj_dump,
        ],
        pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{ExecutionLimits, InputConvention};

    #[test]
    fn corpus_shape() {
        let c = corpus();
        assert!(c.len() >= 6);
        let triggered = c
            .iter()
            .filter(|p| p.expected == VerdictKind::Triggered)
            .count();
        let not_reached = c
            .iter()
            .filter(|p| p.expected == VerdictKind::NotReached)
            .count();
        assert!(triggered >= 4);
        assert!(not_reached >= 2);
    }

    #[test]
    fn every_poc_crashes_its_basic_at_the_vulnerable_function() {
        for p in corpus() {
            let r = p.basic.run(&p.poc, &ExecutionLimits::default());
            assert_eq!(r.crash_site(), Some(&p.vulnerable), "pair {}", p.id);
        }
    }

    #[test]
    fn triggered_pairs_reuse_the_vulnerable_function() {
        for p in corpus()
            .iter()
            .filter(|p| p.expected == VerdictKind::Triggered)
        {
            assert!(
                p.basic.reused_functions().contains(&p.vulnerable),
                "{}",
                p.id
            );
            assert!(
                p.target.reused_functions().contains(&p.target_vulnerable()),
                "{}",
                p.id
            );
        }
    }

    #[test]
    fn not_reached_pairs_cannot_reach_the_vulnerable_function() {
        for p in corpus()
            .iter()
            .filter(|p| p.expected == VerdictKind::NotReached)
        {
            assert!(
                !p.target.call_graph().is_reachable(&p.target_vulnerable()),
                "{}",
                p.id
            );
        }
    }

    #[test]
    fn reused_functions_are_graph_nodes() {
        for prog in programs() {
            for f in prog.reused_functions() {
                assert!(prog.call_graph().contains(f), "{} {f:?}", prog.id());
            }
        }
    }

    #[test]
    fn seeds_do_not_crash_targets() {
        for p in corpus() {
            for s in &p.seeds {
                assert!(
                    !p.target.run(s, &ExecutionLimits::default()).is_crash(),
                    "{}",
                    p.id
                );
            }
        }
    }

    #[test]
    fn input_conventions() {
        assert_eq!(
            find_pair("demangle-suite").unwrap().target.convention(),
            InputConvention::Argument
        );
        assert_eq!(
            find_pair("objdump-container").unwrap().target.convention(),
            InputConvention::File
        );
    }
}
