//! Havoc-style mutation with an optional key-bytes dictionary stage.

use rand::Rng;

use crate::model::KeyBytesDictionary;

const ARITH_MAX: u32 = 35;
const HAVOC_STACK_POW: u32 = 6;

const INTERESTING_8: [i8; 9] = [-128, -1, 0, 1, 16, 32, 64, 100, 127];
const INTERESTING_16: [i16; 10] = [-32768, -129, 128, 255, 256, 512, 1000, 1024, 4096, 32767];
const INTERESTING_32: [i32; 8] = [
    -2147483648,
    -100663046,
    -32769,
    32768,
    65535,
    65536,
    100663045,
    2147483647,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MutationParams {
    pub dict_use_prob: f64,
    pub max_len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    BitFlip,
    ByteFlip,
    Arith,
    Interesting,
    BlockDup,
    BlockDelete,
}

const OPS: [Op; 6] = [
    Op::BitFlip,
    Op::ByteFlip,
    Op::Arith,
    Op::Interesting,
    Op::BlockDup,
    Op::BlockDelete,
];

/// Produces one mutant of `input`. When the dictionary is non-empty, a coin
/// weighted by `dict_use_prob` decides between splicing in a dictionary row
/// and the havoc operators; with an empty dictionary the result is exactly
/// [`havoc`]'s.
pub fn mutate<R: Rng + ?Sized>(
    input: &[u8],
    dictionary: &KeyBytesDictionary,
    rng: &mut R,
    params: &MutationParams,
) -> Vec<u8> {
    if !dictionary.is_empty() && rng.gen_bool(params.dict_use_prob.clamp(0.0, 1.0)) {
        let row = &dictionary.rows()[rng.gen_range(0..dictionary.len())].bytes;
        let out = if input.is_empty() || rng.gen_bool(0.5) {
            insert_at(input, rng.gen_range(0..=input.len()), row)
        } else {
            overwrite_at(input, rng.gen_range(0..input.len()), row)
        };
        return finish(input, out, rng, params.max_len);
    }
    havoc(input, rng, params.max_len)
}

/// Baseline mutator: one operator, or a stack of 1 to 64 of them.
pub fn havoc<R: Rng + ?Sized>(input: &[u8], rng: &mut R, max_len: usize) -> Vec<u8> {
    let mut out = input.to_vec();
    let choice = rng.gen_range(0..=OPS.len());
    if choice == OPS.len() {
        let n = 1usize << rng.gen_range(0..=HAVOC_STACK_POW);
        for _ in 0..n {
            let op = OPS[rng.gen_range(0..OPS.len())];
            apply(op, &mut out, rng, max_len);
        }
    } else {
        apply(OPS[choice], &mut out, rng, max_len);
    }
    finish(input, out, rng, max_len)
}

/// Writes `row` over `input` starting at `offset`, growing the buffer when
/// the row runs past the end.
pub fn overwrite_at(input: &[u8], offset: usize, row: &[u8]) -> Vec<u8> {
    let mut out = input.to_vec();
    let end = offset + row.len();
    if out.len() < end {
        out.resize(end, 0);
    }
    out[offset..end].copy_from_slice(row);
    out
}

pub fn insert_at(input: &[u8], offset: usize, row: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(input.len() + row.len());
    out.extend_from_slice(&input[..offset]);
    out.extend_from_slice(row);
    out.extend_from_slice(&input[offset..]);
    out
}

fn finish<R: Rng + ?Sized>(input: &[u8], mut out: Vec<u8>, rng: &mut R, max_len: usize) -> Vec<u8> {
    out.truncate(max_len);
    if out == input {
        if out.is_empty() {
            if max_len > 0 {
                out.push(rng.gen());
            }
        } else {
            let i = rng.gen_range(0..out.len());
            out[i] ^= 1 << rng.gen_range(0..8);
        }
    }
    out
}

fn apply<R: Rng + ?Sized>(op: Op, buf: &mut Vec<u8>, rng: &mut R, max_len: usize) {
    if buf.is_empty() {
        return;
    }
    match op {
        Op::BitFlip => {
            let i = rng.gen_range(0..buf.len());
            buf[i] ^= 1 << rng.gen_range(0..8);
        }
        Op::ByteFlip => {
            let i = rng.gen_range(0..buf.len());
            buf[i] ^= 0xff;
        }
        Op::Arith => {
            let width = pick_width(buf.len(), rng);
            let i = rng.gen_range(0..=buf.len() - width);
            let delta = rng.gen_range(1..=ARITH_MAX);
            let sub = rng.gen_bool(0.5);
            let big = rng.gen_bool(0.5);
            let v = read_word(&buf[i..i + width], big);
            let v = if sub {
                v.wrapping_sub(delta)
            } else {
                v.wrapping_add(delta)
            };
            write_word(&mut buf[i..i + width], v, big);
        }
        Op::Interesting => {
            let width = pick_width(buf.len(), rng);
            let i = rng.gen_range(0..=buf.len() - width);
            let big = rng.gen_bool(0.5);
            let v = match width {
                1 => INTERESTING_8[rng.gen_range(0..INTERESTING_8.len())] as u8 as u32,
                2 => INTERESTING_16[rng.gen_range(0..INTERESTING_16.len())] as u16 as u32,
                _ => INTERESTING_32[rng.gen_range(0..INTERESTING_32.len())] as u32,
            };
            write_word(&mut buf[i..i + width], v, big);
        }
        Op::BlockDup => {
            if buf.len() >= max_len {
                return;
            }
            let len = rng.gen_range(1..=buf.len().min(max_len - buf.len()));
            let from = rng.gen_range(0..=buf.len() - len);
            let to = rng.gen_range(0..=buf.len());
            let block = buf[from..from + len].to_vec();
            buf.splice(to..to, block);
        }
        Op::BlockDelete => {
            let len = rng.gen_range(1..=buf.len());
            let from = rng.gen_range(0..=buf.len() - len);
            buf.drain(from..from + len);
        }
    }
}

fn pick_width<R: Rng + ?Sized>(len: usize, rng: &mut R) -> usize {
    let widths: &[usize] = match len {
        1 => &[1],
        2 | 3 => &[1, 2],
        _ => &[1, 2, 4],
    };
    widths[rng.gen_range(0..widths.len())]
}

fn read_word(bytes: &[u8], big: bool) -> u32 {
    let fold = |acc: u32, b: &u8| (acc << 8) | u32::from(*b);
    if big {
        bytes.iter().fold(0, fold)
    } else {
        bytes.iter().rev().fold(0, fold)
    }
}

fn write_word(bytes: &mut [u8], v: u32, big: bool) {
    let n = bytes.len();
    for (k, b) in bytes.iter_mut().enumerate() {
        let shift = if big { 8 * (n - 1 - k) } else { 8 * k };
        *b = (v >> shift) as u8;
    }
}
