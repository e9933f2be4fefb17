//! Closed-form storage, communication and computation overhead of the
//! MAC-based scheme (LEADER) against an AES-based baseline (SBIDS), plus
//! attacker tolerance on complete m-ary trees. Arithmetic is exact.

use std::fmt::Write as _;

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

pub type Exact = Ratio<i128>;

/// Cycle counts per algorithmic construct.
pub mod cycles {
    pub const ADD: u64 = 4;
    pub const MOV: u64 = 4;
    pub const XOR: u64 = 4;

    pub const BR: u64 = 3;
    pub const INX: u64 = 5;
    pub const DCR: u64 = 4;
    pub const CMP: u64 = 6;
    pub const JNZ: u64 = 3;
    pub const STA: u64 = 5;
    pub const HLT: u64 = 6;
    pub const JMP: u64 = 2;
    pub const JL: u64 = 2;

    pub const SEARCH: u64 = 2 * BR + 5 * MOV + INX + DCR + CMP + 2 * JNZ + 2 * STA + 2 * HLT;
    pub const IF_ELSE: u64 = JMP + JL + CMP;
    pub const HMAC_LOCHA: u64 = 6032;

    pub const AES_ENC_PER_BYTE: u64 = 1891;
    pub const AES_DEC_PER_BYTE: u64 = 2406;
    pub const AES_MESSAGE_BYTES: u64 = 80;

    pub const fn aes_encrypt(bytes: u64) -> u64 {
        AES_ENC_PER_BYTE * bytes
    }

    pub const fn aes_decrypt(bytes: u64) -> u64 {
        AES_DEC_PER_BYTE * bytes
    }
}

/// Bytes per stored key.
pub const KEY_BYTES: u64 = 16;
/// LOCHA substitution tables: 97 + 68 two-byte integers.
pub const LOCHA_TABLE_BYTES: u64 = (97 + 68) * 2;
/// AES S-box and inverse S-box.
pub const AES_TABLE_BYTES: u64 = 256 + 256;
pub const LEADER_ENTRY_BYTES: u64 = 8;
pub const SBIDS_ENTRY_BYTES: u64 = 10;

pub const LEADER_DAO_BYTES: u64 = 78;
pub const SBIDS_DAO_BYTES: u64 = 80;

fn ratio(num: i128, den: i128) -> Exact {
    Ratio::new(num, den)
}

/// mJ per transmitted / received byte.
pub fn tx_mj_per_byte() -> Exact {
    ratio(189, 100_000)
}

pub fn rx_mj_per_byte() -> Exact {
    ratio(167, 100_000)
}

/// 3 V x 1.8 mA x 0.125 us, in nJ.
pub fn nj_per_cycle() -> Exact {
    ratio(3, 1) * ratio(18, 10) * ratio(125, 1000)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scheme {
    Leader,
    Sbids,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::Leader, Scheme::Sbids];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Leader => "LEADER",
            Scheme::Sbids => "SBIDS",
        }
    }

    pub fn dao_bytes(self) -> u64 {
        match self {
            Scheme::Leader => LEADER_DAO_BYTES,
            Scheme::Sbids => SBIDS_DAO_BYTES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverheadParams {
    pub n: u64,
    pub d: u64,
    pub m: u64,
    pub depth: u32,
    pub scheme: Scheme,
}

/// Sink plus per-node storage in bytes.
pub fn storage(scheme: Scheme, n: u64) -> u64 {
    let (entry, tables) = match scheme {
        Scheme::Leader => (LEADER_ENTRY_BYTES, LOCHA_TABLE_BYTES),
        Scheme::Sbids => (SBIDS_ENTRY_BYTES, AES_TABLE_BYTES),
    };
    let sink = entry * n + KEY_BYTES + tables;
    let nodes = n * (KEY_BYTES + tables);
    sink + nodes
}

/// Network energy (mJ) of one DAO from hop distance `d`: `d` transmissions
/// and `d` receptions.
pub fn comm_energy(scheme: Scheme, d: u64) -> Exact {
    let bytes = Exact::from_integer((scheme.dao_bytes() * d) as i128);
    bytes * (tx_mj_per_byte() + rx_mj_per_byte())
}

/// One labelled term of a cycle sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CycleTerm {
    pub construct: &'static str,
    pub count: u64,
    pub cycles_each: u64,
}

impl CycleTerm {
    pub fn total(&self) -> u64 {
        self.count * self.cycles_each
    }
}

fn term(construct: &'static str, count: u64, cycles_each: u64) -> CycleTerm {
    CycleTerm {
        construct,
        count,
        cycles_each,
    }
}

pub fn sender_terms(scheme: Scheme) -> Vec<CycleTerm> {
    match scheme {
        Scheme::Leader => vec![term("HMAC-LOCHA", 1, cycles::HMAC_LOCHA)],
        Scheme::Sbids => vec![term("AES-128 encryption", 1, cycles::aes_encrypt(cycles::AES_MESSAGE_BYTES))],
    }
}

pub fn sink_terms(scheme: Scheme) -> Vec<CycleTerm> {
    match scheme {
        Scheme::Leader => vec![
            term("HMAC-LOCHA", 1, cycles::HMAC_LOCHA),
            term("IF-ELSE", 8, cycles::IF_ELSE),
            term("MOV", 9, cycles::MOV),
            term("ADD", 3, cycles::ADD),
            term("SEARCH", 2, cycles::SEARCH),
        ],
        Scheme::Sbids => vec![
            term("AES-128 decryption", 1, cycles::aes_decrypt(cycles::AES_MESSAGE_BYTES)),
            term("IF-ELSE", 7, cycles::IF_ELSE),
            term("MOV", 4, cycles::MOV),
            term("ADD", 3, cycles::ADD),
            term("SEARCH", 3, cycles::SEARCH),
        ],
    }
}

pub fn sender_cycles(scheme: Scheme) -> u64 {
    sender_terms(scheme).iter().map(CycleTerm::total).sum()
}

pub fn sink_cycles(scheme: Scheme) -> u64 {
    sink_terms(scheme).iter().map(CycleTerm::total).sum()
}

/// Sender plus sink computation energy for one DAO, nJ.
pub fn comp_energy(scheme: Scheme) -> Exact {
    let total = sender_cycles(scheme) + sink_cycles(scheme);
    Exact::from_integer(total as i128) * nj_per_cycle()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverheadReport {
    pub scheme: Scheme,
    pub storage_bytes: u64,
    pub comm_energy_mj: f64,
    pub comp_energy_nj: f64,
    pub sender_cycles: u64,
    pub sink_cycles: u64,
}

pub fn report(scheme: Scheme, n: u64, d: u64) -> OverheadReport {
    OverheadReport {
        scheme,
        storage_bytes: storage(scheme, n),
        comm_energy_mj: to_f64(comm_energy(scheme, d)),
        comp_energy_nj: to_f64(comp_energy(scheme)),
        sender_cycles: sender_cycles(scheme),
        sink_cycles: sink_cycles(scheme),
    }
}

pub fn to_f64(x: Exact) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// Lower and upper neighbours of `x` on the grid of `decimals` places.
pub fn display_bracket(x: Exact, decimals: u32) -> (Exact, Exact) {
    let scale = Exact::from_integer(10i128.pow(decimals));
    let scaled = x * scale;
    (scaled.floor() / scale, scaled.ceil() / scale)
}

/// Renders an exact value with a fixed number of decimals, rounding half up.
pub fn format_exact(x: Exact, decimals: u32) -> String {
    let scale = 10i128.pow(decimals);
    let scaled = (x * Exact::from_integer(scale)).round().to_integer();
    if decimals == 0 {
        return scaled.to_string();
    }
    let sign = if scaled < 0 { "-" } else { "" };
    let a = scaled.abs();
    format!("{sign}{}.{:0width$}", a / scale, a % scale, width = decimals as usize)
}

/// Shortest decimal rendering of an exact value with a terminating expansion.
pub fn format_terminating(x: Exact) -> String {
    for decimals in 0..=18 {
        let scale = Exact::from_integer(10i128.pow(decimals));
        if (x * scale).is_integer() {
            return format_exact(x, decimals);
        }
    }
    format_exact(x, 18)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum OverheadError {
    #[error("tree size overflows 64 bits")]
    Overflow,
    #[error("tree arity and depth must be at least 1")]
    BadTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Tolerance {
    pub m: u64,
    pub depth: u32,
    pub nodes: u64,
    pub decreased: u64,
    pub increased: u64,
}

/// Maximum attackers a complete m-ary tree of depth `depth` tolerates.
/// `m = 1` is a path of `depth + 1` nodes.
pub fn tolerance(m: u64, depth: u32) -> Result<Tolerance, OverheadError> {
    if m == 0 || depth == 0 {
        return Err(OverheadError::BadTree);
    }
    // 1 + m + ... + m^k
    let series = |k: u32| -> Result<u64, OverheadError> {
        let mut sum: u64 = 0;
        let mut pow: u64 = 1;
        for i in 0..=k {
            sum = sum.checked_add(pow).ok_or(OverheadError::Overflow)?;
            if i < k {
                pow = pow.checked_mul(m).ok_or(OverheadError::Overflow)?;
            }
        }
        Ok(sum)
    };
    let nodes = series(depth)?;
    let internal = series(depth - 1)?;
    Ok(Tolerance {
        m,
        depth,
        nodes,
        decreased: nodes - 1,
        increased: nodes - 1 - internal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
}

fn terms_text(terms: &[CycleTerm]) -> String {
    terms
        .iter()
        .map(|t| {
            if t.count == 1 {
                t.construct.to_string()
            } else {
                format!("{}*{}", t.count, t.construct)
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn sum_text(terms: &[CycleTerm]) -> String {
    terms
        .iter()
        .map(|t| {
            if t.count == 1 {
                t.cycles_each.to_string()
            } else {
                format!("{}*{}", t.count, t.cycles_each)
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Construct cycle table, per-DAO cycle breakdown, overhead comparison and
/// tolerance report.
pub fn render(n: u64, d: u64, m: u64, depth: u32, format: Format) -> Result<String, OverheadError> {
    let tol = tolerance(m, depth)?;
    let table1 = [
        ("ADD/SUBTRACT/MOV/XOR", cycles::ADD),
        ("SEARCH", cycles::SEARCH),
        ("IF-ELSE", cycles::IF_ELSE),
        ("HMAC-LOCHA", cycles::HMAC_LOCHA),
        ("AES-128 encryption", cycles::aes_encrypt(cycles::AES_MESSAGE_BYTES)),
        ("AES-128 decryption", cycles::aes_decrypt(cycles::AES_MESSAGE_BYTES)),
    ];
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str("table,scheme,item,value\n");
            for (name, c) in table1 {
                writeln!(out, "constructs,,{name},{c}").unwrap();
            }
            for s in Scheme::ALL {
                writeln!(out, "cycles,{},sender,{}", s.name(), sender_cycles(s)).unwrap();
                writeln!(out, "cycles,{},sink,{}", s.name(), sink_cycles(s)).unwrap();
            }
            for s in Scheme::ALL {
                let comm = comm_energy(s, d);
                let comp = comp_energy(s);
                let name = s.name();
                writeln!(out, "overhead,{name},storage_bytes,{}", storage(s, n)).unwrap();
                writeln!(out, "overhead,{name},comm_energy_mj,{}", format_terminating(comm)).unwrap();
                let (lo, hi) = display_bracket(comm, 2);
                writeln!(out, "overhead,{name},comm_energy_mj_floor_2dp,{}", format_exact(lo, 2)).unwrap();
                writeln!(out, "overhead,{name},comm_energy_mj_ceil_2dp,{}", format_exact(hi, 2)).unwrap();
                writeln!(out, "overhead,{name},comp_energy_nj,{}", format_terminating(comp)).unwrap();
                let (lo, hi) = display_bracket(comp, 0);
                writeln!(out, "overhead,{name},comp_energy_nj_floor,{}", format_exact(lo, 0)).unwrap();
                writeln!(out, "overhead,{name},comp_energy_nj_ceil,{}", format_exact(hi, 0)).unwrap();
            }
            writeln!(out, "tolerance,,nodes,{}", tol.nodes).unwrap();
            writeln!(out, "tolerance,,decreased,{}", tol.decreased).unwrap();
            writeln!(out, "tolerance,,increased,{}", tol.increased).unwrap();
        }
        Format::Text => {
            out.push_str("Cycles per construct\n");
            for (name, c) in table1 {
                writeln!(out, "  {name:<24} {c:>8}").unwrap();
            }
            writeln!(out, "\nAdditional cycles per DAO").unwrap();
            for s in Scheme::ALL {
                let snd = sender_terms(s);
                let snk = sink_terms(s);
                writeln!(out, "  {:<7} sender  {:<50} {} = {}", s.name(), terms_text(&snd), sum_text(&snd), sender_cycles(s)).unwrap();
                writeln!(out, "  {:<7} sink    {:<50} {} = {}", "", terms_text(&snk), sum_text(&snk), sink_cycles(s)).unwrap();
            }
            writeln!(out, "\nOverhead comparison (n = {n}, d = {d})").unwrap();
            writeln!(out, "  {:<7} {:>14} {:>24} {:>28}", "scheme", "storage (B)", "comm (mJ)", "comp (nJ)").unwrap();
            for s in Scheme::ALL {
                let comm = comm_energy(s, d);
                let comp = comp_energy(s);
                let (cl, ch) = display_bracket(comm, 2);
                let (pl, ph) = display_bracket(comp, 0);
                let comm_s = format!("{} [{}, {}]", format_terminating(comm), format_exact(cl, 2), format_exact(ch, 2));
                let comp_s = format!("{} [{}, {}]", format_terminating(comp), format_exact(pl, 0), format_exact(ph, 0));
                writeln!(out, "  {:<7} {:>14} {:>24} {:>28}", s.name(), storage(s, n), comm_s, comp_s).unwrap();
            }
            writeln!(out, "  (bracketed: neighbouring values at display precision)").unwrap();
            writeln!(out, "\nAttacker tolerance, complete {m}-ary tree of depth {depth} ({} nodes)", tol.nodes).unwrap();
            writeln!(out, "  decreased rank: {}", tol.decreased).unwrap();
            writeln!(out, "  increased rank: {}", tol.increased).unwrap();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construct_sums() {
        assert_eq!(cycles::SEARCH, 69);
        assert_eq!(cycles::IF_ELSE, 10);
        assert_eq!(cycles::aes_encrypt(80), 151_280);
        assert_eq!(cycles::aes_decrypt(80), 192_480);
    }

    #[test]
    fn per_dao_cycles() {
        assert_eq!(sender_cycles(Scheme::Leader), 6032);
        assert_eq!(sink_cycles(Scheme::Leader), 6298);
        assert_eq!(sender_cycles(Scheme::Sbids), 151_280);
        assert_eq!(sink_cycles(Scheme::Sbids), 192_785);
    }

    #[test]
    fn storage_values() {
        assert_eq!(storage(Scheme::Leader, 50), 18046);
        assert_eq!(storage(Scheme::Sbids, 50), 27428);
        assert_eq!(storage(Scheme::Leader, 0), 346);
        for n in 0..1000 {
            assert_eq!(storage(Scheme::Leader, n), 354 * n + 346);
            assert_eq!(storage(Scheme::Sbids, n), 538 * n + 528);
        }
    }

    #[test]
    fn energy_values() {
        assert_eq!(nj_per_cycle(), ratio(675, 1000));
        assert_eq!(comm_energy(Scheme::Leader, 1), ratio(27768, 100_000));
        assert_eq!(comm_energy(Scheme::Leader, 5), ratio(13884, 10_000));
        assert_eq!(comm_energy(Scheme::Sbids, 5), ratio(1424, 1000));
        assert_eq!(comp_energy(Scheme::Leader), ratio(832275, 100));
        assert_eq!(comp_energy(Scheme::Sbids), ratio(232_243_875, 1000));
    }

    #[test]
    fn formatting() {
        assert_eq!(format_terminating(ratio(13884, 10_000)), "1.3884");
        assert_eq!(format_exact(ratio(13884, 10_000), 2), "1.39");
        assert_eq!(format_terminating(Exact::from_integer(7)), "7");
        let (lo, hi) = display_bracket(ratio(1424, 1000), 2);
        assert_eq!((lo, hi), (ratio(142, 100), ratio(143, 100)));
    }

    #[test]
    fn tolerance_values() {
        let t = tolerance(2, 3).unwrap();
        assert_eq!((t.nodes, t.decreased, t.increased), (15, 14, 7));
        let t = tolerance(3, 1).unwrap();
        assert_eq!((t.nodes, t.decreased, t.increased), (4, 3, 2));
        let t = tolerance(1, 5).unwrap();
        assert_eq!((t.nodes, t.decreased, t.increased), (6, 5, 0));
        assert_eq!(tolerance(u64::MAX, 3), Err(OverheadError::Overflow));
        assert_eq!(tolerance(0, 3), Err(OverheadError::BadTree));
    }

    #[test]
    fn leader_cheaper_everywhere() {
        for n in 0..500 {
            assert!(storage(Scheme::Leader, n) < storage(Scheme::Sbids, n));
        }
        for d in 1..100 {
            assert!(comm_energy(Scheme::Leader, d) < comm_energy(Scheme::Sbids, d));
        }
        assert!(comp_energy(Scheme::Leader) < comp_energy(Scheme::Sbids));
    }

    #[test]
    fn csv_render_has_rows() {
        let csv = render(50, 5, 2, 3, Format::Csv).unwrap();
        assert!(csv.contains("overhead,LEADER,storage_bytes,18046"));
        assert!(csv.contains("overhead,SBIDS,comp_energy_nj,232243.875"));
        assert!(csv.contains("tolerance,,increased,7"));
    }
}
