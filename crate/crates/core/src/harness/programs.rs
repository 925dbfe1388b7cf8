//! Bundled toy programs. Each family shares one block of "library" code
//! (the reused region) between a basic program and one or more targets that
//! wrap it differently.

use crate::model::CallGraph;

use super::{Exec, Flow, InputConvention, TargetProgram};

/// Compares `lit` against the input at `p` without reading past `end`.
fn lit_at(ex: &mut Exec<'_>, p: usize, end: usize, lit: &[u8]) -> Flow<bool> {
    if p + lit.len() > end {
        return Ok(false);
    }
    ex.matches(p, lit)
}

fn byte_in(ex: &mut Exec<'_>, p: usize, end: usize) -> Flow<Option<u8>> {
    if p >= end {
        return Ok(None);
    }
    ex.byte(p)
}

fn build(
    id: &str,
    edges: &[(&str, &str)],
    extra: &[&str],
    reused: &[&str],
    convention: InputConvention,
    body: super::Body,
) -> TargetProgram {
    let graph =
        CallGraph::from_names(id, "main", edges, extra).expect("bundled graph is well formed");
    TargetProgram::new(id, graph, reused, convention, body).expect("bundled program is well formed")
}

// ---------------------------------------------------------------------------
// Demangler library (cxxfilt / nm-new / objdump / size)

mod demangle {
    use super::*;

    pub const EDGES: &[(&str, &str)] = &[
        ("cplus_demangle", "demangle_signature"),
        ("cplus_demangle", "demangle_template"),
        ("demangle_signature", "do_type"),
        ("demangle_signature", "demangle_qualified"),
        ("do_type", "register_btype"),
        ("do_type", "remember_ktype"),
        ("demangle_template", "consume_count"),
        ("demangle_template", "string_appendn"),
    ];

    pub const REUSED: &[&str] = &[
        "cplus_demangle",
        "demangle_signature",
        "demangle_qualified",
        "do_type",
        "register_btype",
        "remember_ktype",
        "demangle_template",
        "consume_count",
        "string_appendn",
    ];

    /// Demangles the symbol occupying `[s, e)`.
    pub fn cplus_demangle(ex: &mut Exec<'_>, s: usize, e: usize) -> Flow {
        ex.call("cplus_demangle", |ex| {
            let z = lit_at(ex, s, e, b"_Z")?;
            if ex.branch(0, z)? {
                return demangle_signature(ex, s + 2, e);
            }
            let t = lit_at(ex, s, e, b"__t")?;
            if ex.branch(1, t)? {
                return demangle_template(ex, s + 3, e);
            }
            Ok(())
        })
    }

    fn demangle_signature(ex: &mut Exec<'_>, p: usize, e: usize) -> Flow {
        ex.call("demangle_signature", |ex| {
            let mut i = p;
            while i < e && i < p + 32 {
                let Some(c) = ex.byte(i)? else { break };
                if ex.branch(0, c == b'B')? {
                    let next = byte_in(ex, i + 1, e)?;
                    if ex.branch(1, next == Some(b't'))? {
                        return do_type(ex, i + 2, e);
                    }
                }
                if ex.branch(2, c == b'N')? {
                    demangle_qualified(ex, i + 1, e)?;
                }
                ex.branch(3, c.is_ascii_digit())?;
                i += 1;
            }
            Ok(())
        })
    }

    fn demangle_qualified(ex: &mut Exec<'_>, p: usize, e: usize) -> Flow {
        ex.call("demangle_qualified", |ex| {
            let n = byte_in(ex, p, e)?;
            ex.branch(0, n.is_some_and(|c| c.is_ascii_digit()))?;
            Ok(())
        })
    }

    fn do_type(ex: &mut Exec<'_>, p: usize, e: usize) -> Flow {
        ex.call("do_type", |ex| {
            let c = byte_in(ex, p, e)?;
            if ex.branch(0, c == Some(b'K'))? {
                ex.call("remember_ktype", |_| Ok(()))?;
                return Ok(());
            }
            if let Some(c) = c.filter(u8::is_ascii_digit) {
                ex.branch(1, true)?;
                return register_btype(ex, c - b'0');
            }
            Ok(())
        })
    }

    fn register_btype(ex: &mut Exec<'_>, index: u8) -> Flow {
        ex.call("register_btype", |ex| {
            // only 7 btype slots are ever allocated
            if ex.branch(0, index >= 7)? {
                return ex.crash();
            }
            Ok(())
        })
    }

    fn demangle_template(ex: &mut Exec<'_>, p: usize, e: usize) -> Flow {
        ex.call("demangle_template", |ex| {
            let (n, digits) = consume_count(ex, p, e)?;
            if ex.branch(0, digits > 0)? {
                string_appendn(ex, n)?;
            }
            Ok(())
        })
    }

    fn consume_count(ex: &mut Exec<'_>, p: usize, e: usize) -> Flow<(u32, usize)> {
        ex.call("consume_count", |ex| {
            let mut n = 0u32;
            let mut digits = 0;
            while digits < 4 {
                let c = byte_in(ex, p + digits, e)?;
                if !ex.branch(0, c.is_some_and(|c| c.is_ascii_digit()))? {
                    break;
                }
                n = n * 10 + u32::from(c.unwrap_or(b'0') - b'0');
                digits += 1;
            }
            Ok((n, digits))
        })
    }

    fn string_appendn(ex: &mut Exec<'_>, n: u32) -> Flow {
        ex.call("string_appendn", |ex| {
            // length arithmetic overflows the 9-bit scratch buffer
            if ex.branch(0, n >= 512)? {
                return ex.crash();
            }
            Ok(())
        })
    }
}

fn with_lib(
    edges: &[(&'static str, &'static str)],
    lib: &[(&'static str, &'static str)],
) -> Vec<(&'static str, &'static str)> {
    edges.iter().chain(lib).copied().collect()
}

/// String-argument demangler: the whole input is one mangled symbol.
pub fn cxxfilt() -> TargetProgram {
    fn body(ex: &mut Exec<'_>) -> Flow {
        let e = ex.len();
        demangle::cplus_demangle(ex, 0, e)
    }
    let edges = with_lib(&[("main", "cplus_demangle")], demangle::EDGES);
    build(
        "cxxfilt",
        &edges,
        &[],
        demangle::REUSED,
        InputConvention::Argument,
        body,
    )
}

/// Symbol lister: `[-opts ]symbol`; a leading `.` marks a dynamic symbol.
pub fn nm_new() -> TargetProgram {
    fn parse_options(ex: &mut Exec<'_>) -> Flow<usize> {
        ex.call("parse_options", |ex| {
            let mut i = 1;
            while i < 10 {
                let Some(c) = ex.byte(i)? else { return Ok(i) };
                if ex.branch(0, c == b' ')? {
                    return Ok(i + 1);
                }
                for (site, opt) in (1u32..).zip(*b"aCDgupSlr") {
                    ex.branch(site, c == opt)?;
                }
                i += 1;
            }
            Ok(i)
        })
    }

    fn bfd_demangle(ex: &mut Exec<'_>, s: usize, e: usize) -> Flow {
        ex.call("bfd_demangle", |ex| {
            let dot = byte_in(ex, s, e)?;
            if ex.branch(0, dot == Some(b'.'))? {
                return demangle::cplus_demangle(ex, s + 1, e);
            }
            demangle::cplus_demangle(ex, s, e)
        })
    }

    fn body(ex: &mut Exec<'_>) -> Flow {
        let e = ex.len();
        let first = ex.byte(0)?;
        let s = if ex.branch(0, first == Some(b'-'))? {
            parse_options(ex)?
        } else {
            0
        };
        let c = byte_in(ex, s, e)?;
        if ex.branch(1, c == Some(b'.'))? {
            ex.call("print_dynamic_symbol", |ex| bfd_demangle(ex, s + 1, e))
        } else {
            ex.call("print_symbol", |ex| {
                let t = byte_in(ex, s, e)?;
                ex.branch(0, t.is_some_and(|t| t.is_ascii_uppercase()))?;
                bfd_demangle(ex, s, e)
            })
        }
    }

    let edges = with_lib(
        &[
            ("main", "parse_options"),
            ("main", "print_symbol"),
            ("main", "print_dynamic_symbol"),
            ("print_symbol", "bfd_demangle"),
            ("print_dynamic_symbol", "bfd_demangle"),
            ("bfd_demangle", "cplus_demangle"),
        ],
        demangle::EDGES,
    );
    build(
        "nm-new",
        &edges,
        &[],
        demangle::REUSED,
        InputConvention::Argument,
        body,
    )
}

const OBJ_MAGIC: &[u8] = b"OBJ\x01";

/// Object dumper over a tiny container:
/// `"OBJ\x01" flags:u8 nsyms:u8 { len:u8 name[len] }*`.
pub fn objdump() -> TargetProgram {
    fn dump_headers(ex: &mut Exec<'_>, e: usize) -> Flow {
        ex.call("dump_headers", |ex| {
            for i in 0..3u32 {
                let b = byte_in(ex, 6 + i as usize, e)?;
                ex.branch(i, b.is_some_and(|b| b & 0x80 != 0))?;
            }
            Ok(())
        })
    }

    fn dump_sections(ex: &mut Exec<'_>, e: usize) -> Flow {
        ex.call("dump_sections", |ex| {
            let n = byte_in(ex, 5, e)?.unwrap_or(0);
            for (site, lim) in (0u32..).zip([1u8, 2, 4, 8]) {
                ex.branch(site, n >= lim)?;
            }
            Ok(())
        })
    }

    fn print_symbol_name(ex: &mut Exec<'_>, s: usize, e: usize) -> Flow {
        ex.call("print_symbol_name", |ex| {
            ex.call("bfd_demangle", |ex| demangle::cplus_demangle(ex, s, e))
        })
    }

    fn dump_symbols(ex: &mut Exec<'_>, e: usize) -> Flow {
        ex.call("dump_symbols", |ex| {
            let nsyms = byte_in(ex, 5, e)?.unwrap_or(0).min(4);
            let mut p = 6;
            for k in 0..u32::from(nsyms) {
                let Some(len) = byte_in(ex, p, e)? else { break };
                let end = (p + 1 + len as usize).min(e);
                if ex.branch(k, end > p + 1)? {
                    print_symbol_name(ex, p + 1, end)?;
                }
                p = end;
            }
            Ok(())
        })
    }

    fn body(ex: &mut Exec<'_>) -> Flow {
        let e = ex.len();
        ex.call("load_object", |ex| {
            let ok = lit_at(ex, 0, e, OBJ_MAGIC)?;
            if !ex.branch(0, ok)? {
                return Ok(());
            }
            let flags = byte_in(ex, 4, e)?.unwrap_or(0);
            if ex.branch(1, flags & 1 != 0)? {
                dump_headers(ex, e)?;
            }
            if ex.branch(2, flags & 2 != 0)? {
                dump_sections(ex, e)?;
            }
            if ex.branch(3, flags & 4 != 0)? {
                dump_symbols(ex, e)?;
            }
            Ok(())
        })
    }

    let edges = with_lib(
        &[
            ("main", "load_object"),
            ("load_object", "dump_headers"),
            ("load_object", "dump_sections"),
            ("load_object", "dump_symbols"),
            ("dump_symbols", "print_symbol_name"),
            ("print_symbol_name", "bfd_demangle"),
            ("bfd_demangle", "cplus_demangle"),
        ],
        demangle::EDGES,
    );
    build(
        "objdump",
        &edges,
        &[],
        demangle::REUSED,
        InputConvention::File,
        body,
    )
}

/// Section size printer. Links the demangler but never calls it.
pub fn size() -> TargetProgram {
    fn body(ex: &mut Exec<'_>) -> Flow {
        let e = ex.len();
        ex.call("read_object", |ex| {
            let ok = lit_at(ex, 0, e, OBJ_MAGIC)?;
            if !ex.branch(0, ok)? {
                return Ok(());
            }
            ex.call("print_sizes", |ex| {
                let n = byte_in(ex, 4, e)?.unwrap_or(0);
                let mut total = 0u32;
                for i in 0..usize::from(n.min(8)) {
                    let s = byte_in(ex, 5 + i, e)?.unwrap_or(0);
                    total += u32::from(s);
                }
                ex.branch(0, total > 255)?;
                Ok(())
            })
        })
    }
    let edges = with_lib(
        &[("main", "read_object"), ("read_object", "print_sizes")],
        demangle::EDGES,
    );
    build(
        "size",
        &edges,
        &[],
        demangle::REUSED,
        InputConvention::File,
        body,
    )
}

// ---------------------------------------------------------------------------
// Action-record decoder (swftophp / listswf)

mod action {
    use super::*;

    pub const MAGIC: &[u8] = b"\x7fMGK";

    pub const EDGES: &[(&str, &str)] = &[
        ("decode_header", "decode_action"),
        ("decode_action", "d_print_comp"),
        ("decode_action", "d_print_label"),
    ];

    pub const REUSED: &[&str] = &[
        "decode_header",
        "decode_action",
        "d_print_comp",
        "d_print_label",
    ];

    pub fn decode_header(ex: &mut Exec<'_>, p: usize, e: usize) -> Flow {
        ex.call("decode_header", |ex| {
            let ok = lit_at(ex, p, e, MAGIC)?;
            if ex.branch(0, ok)? {
                return decode_action(ex, p + 4, e);
            }
            Ok(())
        })
    }

    fn decode_action(ex: &mut Exec<'_>, p: usize, e: usize) -> Flow {
        ex.call("decode_action", |ex| {
            if p + 2 > e {
                return Ok(());
            }
            let Some(&[op, arg]) = ex.bytes(p, 2)? else {
                return Ok(());
            };
            if ex.branch(0, op == 0x96)? {
                return ex.call("d_print_comp", |ex| {
                    // component table holds 0xe0 entries
                    if ex.branch(0, arg >= 0xe0)? {
                        return ex.crash();
                    }
                    Ok(())
                });
            }
            if ex.branch(1, op == 0x07)? {
                ex.call("d_print_label", |ex| {
                    ex.branch(0, arg & 1 == 1)?;
                    Ok(())
                })?;
            }
            Ok(())
        })
    }
}

/// Flash-style converter: the input is a bare action stream.
pub fn swftophp() -> TargetProgram {
    fn body(ex: &mut Exec<'_>) -> Flow {
        let e = ex.len();
        ex.call("read_swf", |ex| {
            if ex.branch(0, e >= 6)? {
                action::decode_header(ex, 0, e)?;
            }
            Ok(())
        })
    }
    let edges = with_lib(
        &[("main", "read_swf"), ("read_swf", "decode_header")],
        action::EDGES,
    );
    build(
        "swftophp",
        &edges,
        &[],
        action::REUSED,
        InputConvention::File,
        body,
    )
}

/// Record lister: `"LSW" count:u8 { type:u8 len:u8 payload[len] }*`.
/// Type 0x10 records carry an action stream.
pub fn listswf() -> TargetProgram {
    fn body(ex: &mut Exec<'_>) -> Flow {
        let e = ex.len();
        ex.call("parse_movie", |ex| {
            for (i, c) in b"LSW".iter().enumerate() {
                let b = ex.byte(i)?;
                if !ex.branch(i as u32, b == Some(*c))? {
                    return Ok(());
                }
            }
            let count = byte_in(ex, 3, e)?.unwrap_or(0).min(6);
            let mut p = 4;
            for _ in 0..count {
                let (Some(kind), Some(len)) = (byte_in(ex, p, e)?, byte_in(ex, p + 1, e)?) else {
                    break;
                };
                let start = p + 2;
                let end = (start + len as usize).min(e);
                if ex.branch(10, kind == 0x10)? {
                    ex.call("process_action_record", |ex| {
                        action::decode_header(ex, start, end)
                    })?;
                } else if ex.branch(11, kind == 0x01)? {
                    ex.call("list_frame_label", |ex| {
                        let b = byte_in(ex, start, end)?;
                        ex.branch(0, b.is_some_and(|b| b.is_ascii_alphabetic()))?;
                        Ok(())
                    })?;
                } else if ex.branch(12, kind == 0x02)? {
                    ex.call("list_shape", |ex| {
                        for i in 0..3u32 {
                            let b = byte_in(ex, start + i as usize, end)?;
                            ex.branch(i, b.is_some_and(|b| b > 0x40))?;
                        }
                        Ok(())
                    })?;
                }
                p = end;
            }
            Ok(())
        })
    }
    let edges = with_lib(
        &[
            ("main", "parse_movie"),
            ("parse_movie", "process_action_record"),
            ("parse_movie", "list_frame_label"),
            ("parse_movie", "list_shape"),
            ("process_action_record", "decode_header"),
        ],
        action::EDGES,
    );
    build(
        "listswf",
        &edges,
        &[],
        action::REUSED,
        InputConvention::File,
        body,
    )
}

// ---------------------------------------------------------------------------
// Directory-entry library (tiffsplit / thumbnail / tiffcrop)
//
// An entry is four bytes `tag a b c`. Each reused function along the
// normal-tag chain checks exactly one of those bytes.

mod tiff {
    use super::*;

    pub const TAG_NORMAL: u8 = 0x11;
    pub const TAG_SUBIFD: u8 = 0x30;
    pub const SUBIFD_KEY: u8 = 0x33;
    pub const NORMAL_KEY: u8 = 0x22;
    pub const STRIP_KEY: u8 = 0x20;

    #[derive(Clone, Copy)]
    pub struct Variant {
        /// The normal-tag handler is compiled in.
        pub normal_tag: bool,
        /// The sub-IFD handler validates field values before use.
        pub subifd_checked: bool,
        /// `tiff_vget_field` survived dead-code elimination.
        pub vget_linked: bool,
    }

    pub const BASIC: Variant = Variant {
        normal_tag: true,
        subifd_checked: false,
        vget_linked: true,
    };

    pub fn read_directory(ex: &mut Exec<'_>, v: Variant, p: usize, n: usize, e: usize) -> Flow {
        ex.call("tiff_read_directory", |ex| {
            for k in 0..n.min(8) {
                let q = p + 4 * k;
                let Some(tag) = byte_in(ex, q, e)? else { break };
                if v.normal_tag && ex.branch(0, tag == TAG_NORMAL)? {
                    fetch_normal_tag(ex, v, q + 1, e)?;
                } else if ex.branch(1, tag == TAG_SUBIFD)? {
                    fetch_subifd(ex, v, q + 1, e)?;
                } else {
                    print_entry(ex, v, tag, q + 1, e)?;
                }
            }
            Ok(())
        })
    }

    fn fetch_normal_tag(ex: &mut Exec<'_>, v: Variant, p: usize, e: usize) -> Flow {
        ex.call("tiff_fetch_normal_tag", |ex| {
            let a = byte_in(ex, p, e)?;
            if ex.branch(0, a == Some(NORMAL_KEY))? {
                setup_strips(ex, v, p + 1, e, false)?;
            }
            Ok(())
        })
    }

    fn fetch_subifd(ex: &mut Exec<'_>, v: Variant, p: usize, e: usize) -> Flow {
        ex.call("tiff_fetch_subifd", |ex| {
            let a = byte_in(ex, p, e)?;
            if ex.branch(0, a == Some(SUBIFD_KEY))? {
                setup_strips(ex, v, p + 1, e, v.subifd_checked)?;
            }
            Ok(())
        })
    }

    fn setup_strips(ex: &mut Exec<'_>, v: Variant, p: usize, e: usize, checked: bool) -> Flow {
        ex.call("tiff_setup_strips", |ex| {
            let b = byte_in(ex, p, e)?;
            if ex.branch(0, b == Some(STRIP_KEY))? && v.vget_linked {
                vget_field(ex, p + 1, e, checked)?;
            }
            Ok(())
        })
    }

    fn print_entry(ex: &mut Exec<'_>, v: Variant, tag: u8, p: usize, e: usize) -> Flow {
        ex.call("tiff_print_entry", |ex| {
            for (site, lim) in (0u32..).zip([0x08u8, 0x20, 0x30, 0x60, 0x80, 0xa0, 0xc0, 0xe0]) {
                ex.branch(site, tag < lim)?;
            }
            let a = byte_in(ex, p, e)?;
            ex.branch(20, a.is_some_and(|a| a & 0x0f == 0))?;
            if ex.branch(21, tag < 0x10)? && v.vget_linked {
                vget_field(ex, p + 2, e, true)?;
            }
            Ok(())
        })
    }

    pub fn vget_field(ex: &mut Exec<'_>, p: usize, e: usize, checked: bool) -> Flow {
        ex.call("tiff_vget_field", |ex| {
            let c = byte_in(ex, p, e)?;
            let big = ex.branch(0, c.is_some_and(|c| c >= 0xee))?;
            // field count indexes a fixed 0xee-entry table
            if ex.branch(1, big && !checked)? {
                return ex.crash();
            }
            Ok(())
        })
    }

    pub const REUSED_FULL: &[&str] = &[
        "tiff_read_directory",
        "tiff_fetch_normal_tag",
        "tiff_fetch_subifd",
        "tiff_setup_strips",
        "tiff_print_entry",
        "tiff_vget_field",
    ];

    pub const EDGES_FULL: &[(&str, &str)] = &[
        ("tiff_read_directory", "tiff_fetch_normal_tag"),
        ("tiff_read_directory", "tiff_fetch_subifd"),
        ("tiff_read_directory", "tiff_print_entry"),
        ("tiff_fetch_normal_tag", "tiff_setup_strips"),
        ("tiff_fetch_subifd", "tiff_setup_strips"),
        ("tiff_setup_strips", "tiff_vget_field"),
        ("tiff_print_entry", "tiff_vget_field"),
    ];

    /// Variant without `tiff_fetch_normal_tag` and `tiff_vget_field`.
    pub const REUSED_STRIPPED: &[&str] = &[
        "tiff_read_directory",
        "tiff_fetch_subifd",
        "tiff_setup_strips",
        "tiff_print_entry",
    ];

    pub const EDGES_STRIPPED: &[(&str, &str)] = &[
        ("tiff_read_directory", "tiff_fetch_subifd"),
        ("tiff_read_directory", "tiff_print_entry"),
        ("tiff_fetch_subifd", "tiff_setup_strips"),
    ];

    /// Container header `"II*" count:u8`, entries from offset 4.
    pub fn open(ex: &mut Exec<'_>, v: Variant) -> Flow {
        let e = ex.len();
        ex.call("tiff_open", |ex| {
            for (i, c) in b"II*".iter().enumerate() {
                let b = ex.byte(i)?;
                if !ex.branch(i as u32, b == Some(*c))? {
                    return Ok(());
                }
            }
            let n = byte_in(ex, 3, e)?.unwrap_or(0);
            read_directory(ex, v, 4, n as usize, e)
        })
    }
}

/// Splits a bare entry list; every four bytes form one directory entry.
pub fn tiffsplit() -> TargetProgram {
    fn body(ex: &mut Exec<'_>) -> Flow {
        let e = ex.len();
        tiff::read_directory(ex, tiff::BASIC, 0, e.div_ceil(4), e)
    }
    let edges = with_lib(&[("main", "tiff_read_directory")], tiff::EDGES_FULL);
    build(
        "tiffsplit",
        &edges,
        &[],
        tiff::REUSED_FULL,
        InputConvention::File,
        body,
    )
}

/// Thumbnail generator. Its sub-IFD handler was patched to validate values.
pub fn thumbnail() -> TargetProgram {
    const V: tiff::Variant = tiff::Variant {
        normal_tag: true,
        subifd_checked: true,
        vget_linked: true,
    };
    fn body(ex: &mut Exec<'_>) -> Flow {
        tiff::open(ex, V)
    }
    let edges = with_lib(
        &[("main", "tiff_open"), ("tiff_open", "tiff_read_directory")],
        tiff::EDGES_FULL,
    );
    let reused: Vec<&str> = tiff::REUSED_FULL
        .iter()
        .copied()
        .chain(["tiff_open"])
        .collect();
    build(
        "thumbnail",
        &edges,
        &[],
        &reused,
        InputConvention::File,
        body,
    )
}

/// Cropping tool built with the field accessor's critical mode hard-coded
/// off; the compiler dropped the normal-tag handler and the accessor.
pub fn tiffcrop() -> TargetProgram {
    const V: tiff::Variant = tiff::Variant {
        normal_tag: false,
        subifd_checked: true,
        vget_linked: false,
    };
    fn body(ex: &mut Exec<'_>) -> Flow {
        tiff::open(ex, V)
    }
    let edges = with_lib(
        &[("main", "tiff_open"), ("tiff_open", "tiff_read_directory")],
        tiff::EDGES_STRIPPED,
    );
    let reused: Vec<&str> = tiff::REUSED_STRIPPED
        .iter()
        .copied()
        .chain(["tiff_open"])
        .collect();
    build(
        "tiffcrop",
        &edges,
        &[],
        &reused,
        InputConvention::File,
        body,
    )
}

// ---------------------------------------------------------------------------
// Codestream library (opj_decompress / opj_dump)
//
// Marker segments are `0xff id payload`. A tile is decoded only after
// a SIZ segment was accepted.

mod j2k {
    use super::*;

    pub const SIZ: u8 = 0x51;
    pub const COD: u8 = 0x52;
    pub const SOT: u8 = 0x90;
    pub const SOD: u8 = 0x93;
    pub const SIZ_KEY: u8 = 0x10;
    pub const COD_KEY: u8 = 0x04;
    pub const TILE_KEY: u8 = 0x40;

    pub const REUSED: &[&str] = &[
        "opj_j2k_read_header",
        "opj_j2k_read_siz",
        "opj_j2k_read_cod",
        "opj_j2k_read_tile",
        "opj_t2_decode_packets",
        "opj_j2k_dump_tile",
        "opj_t1_decode_cblk",
    ];

    pub const EDGES: &[(&str, &str)] = &[
        ("opj_j2k_read_header", "opj_j2k_read_siz"),
        ("opj_j2k_read_header", "opj_j2k_read_cod"),
        ("opj_j2k_read_header", "opj_j2k_read_tile"),
        ("opj_j2k_read_header", "opj_j2k_dump_tile"),
        ("opj_j2k_read_tile", "opj_t2_decode_packets"),
        ("opj_t2_decode_packets", "opj_t1_decode_cblk"),
        ("opj_j2k_dump_tile", "opj_t1_decode_cblk"),
    ];

    pub fn read_header(ex: &mut Exec<'_>, p: usize, e: usize) -> Flow {
        ex.call("opj_j2k_read_header", |ex| {
            let mut siz = false;
            let mut q = p;
            for _ in 0..8 {
                if q + 2 > e {
                    break;
                }
                let Some(&[ff, id]) = ex.bytes(q, 2)? else {
                    break;
                };
                if !ex.branch(0, ff == 0xff)? {
                    break;
                }
                if ex.branch(1, id == SIZ)? {
                    siz |= ex.call("opj_j2k_read_siz", |ex| {
                        let b = byte_in(ex, q + 2, e)?;
                        ex.branch(0, b == Some(SIZ_KEY))
                    })?;
                    q += 3;
                } else if ex.branch(2, id == COD)? {
                    ex.call("opj_j2k_read_cod", |ex| {
                        let b = byte_in(ex, q + 2, e)?;
                        ex.branch(0, b == Some(COD_KEY))
                    })?;
                    q += 3;
                } else if ex.branch(3, id == SOT)? {
                    if ex.branch(4, siz)? {
                        read_tile(ex, q + 2, e)?;
                    }
                    q += 4;
                } else if ex.branch(5, id == SOD)? {
                    dump_tile(ex, q + 2, e)?;
                    q += 4;
                } else {
                    q += 2;
                }
            }
            Ok(())
        })
    }

    fn read_tile(ex: &mut Exec<'_>, p: usize, e: usize) -> Flow {
        ex.call("opj_j2k_read_tile", |ex| {
            let b = byte_in(ex, p, e)?;
            if ex.branch(0, b == Some(TILE_KEY))? {
                ex.call("opj_t2_decode_packets", |ex| {
                    decode_cblk(ex, p + 1, e, false)
                })?;
            }
            Ok(())
        })
    }

    pub fn dump_tile(ex: &mut Exec<'_>, p: usize, e: usize) -> Flow {
        ex.call("opj_j2k_dump_tile", |ex| {
            let b = byte_in(ex, p, e)?;
            ex.branch(0, b.is_some_and(|b| b & 0x80 != 0))?;
            decode_cblk(ex, p + 1, e, true)
        })
    }

    fn decode_cblk(ex: &mut Exec<'_>, p: usize, e: usize, dump_only: bool) -> Flow {
        ex.call("opj_t1_decode_cblk", |ex| {
            let b = byte_in(ex, p, e)?;
            let wide = ex.branch(0, b.is_some_and(|b| b >= 0xe0))?;
            // code-block width beyond the 0xe0-sample scratch buffer
            if ex.branch(1, wide && !dump_only)? {
                return ex.crash();
            }
            Ok(())
        })
    }
}

/// Codestream decoder: the input is a raw marker stream.
pub fn opj_decompress() -> TargetProgram {
    fn body(ex: &mut Exec<'_>) -> Flow {
        let e = ex.len();
        ex.call("opj_decode", |ex| j2k::read_header(ex, 0, e))
    }
    let edges = with_lib(
        &[
            ("main", "opj_decode"),
            ("opj_decode", "opj_j2k_read_header"),
        ],
        j2k::EDGES,
    );
    build(
        "opj_decompress",
        &edges,
        &[],
        j2k::REUSED,
        InputConvention::File,
        body,
    )
}

/// Codestream dumper. Wraps the stream in a `"jP" len:u8` box and offers a
/// quick tile dump that bypasses header validation.
pub fn opj_dump() -> TargetProgram {
    fn body(ex: &mut Exec<'_>) -> Flow {
        let e = ex.len();
        ex.call("opj_read_box", |ex| {
            let ok = lit_at(ex, 0, e, b"jP")?;
            if !ex.branch(0, ok)? {
                return Ok(());
            }
            let mode = byte_in(ex, 2, e)?.unwrap_or(0);
            if ex.branch(1, mode == b'q')? {
                return ex.call("opj_quick_dump", |ex| {
                    for i in 0..4u32 {
                        let b = byte_in(ex, 3 + i as usize, e)?;
                        ex.branch(i, b.is_some_and(|b| b > 0x7f))?;
                    }
                    j2k::dump_tile(ex, 7, e)
                });
            }
            j2k::read_header(ex, 3, e)
        })
    }
    let edges = with_lib(
        &[
            ("main", "opj_read_box"),
            ("opj_read_box", "opj_j2k_read_header"),
            ("opj_read_box", "opj_quick_dump"),
            ("opj_quick_dump", "opj_j2k_dump_tile"),
        ],
        j2k::EDGES,
    );
    build(
        "opj_dump",
        &edges,
        &[],
        j2k::REUSED,
        InputConvention::File,
        body,
    )
}

pub(super) use action::MAGIC as ACTION_MAGIC;
pub(super) use j2k::{COD, COD_KEY, SIZ, SIZ_KEY, SOD, SOT, TILE_KEY};
pub(super) use tiff::{NORMAL_KEY, STRIP_KEY, TAG_NORMAL, TAG_SUBIFD};
