//! Byte layout of the extended DAO Transit Information option and of the
//! full DAO message body.
//!
//! All multi-byte fields are network order. See `docs/FORMATS.md` for the
//! offset table.

use thiserror::Error;

use crate::model::{MacTag, NodeId, Rank};

pub const TRANSIT_OPTION_TYPE: u8 = 0x06;
pub const TARGET_OPTION_TYPE: u8 = 0x05;

/// Option length of the unmodified Transit Information option (bytes after
/// the length field).
pub const BASE_TRANSIT_LEN: u8 = 20;
/// Parent rank + rank + MAC.
pub const TRANSIT_EXTENSION_LEN: usize = 2 + 2 + MacTag::LEN;
pub const EXT_TRANSIT_LEN: u8 = BASE_TRANSIT_LEN + TRANSIT_EXTENSION_LEN as u8;
/// Encoded size of the extended option including type and length bytes.
pub const EXT_TRANSIT_SIZE: usize = 2 + EXT_TRANSIT_LEN as usize;

const DAO_HEADER_LEN: usize = 4;
const DODAG_ID_LEN: usize = 16;
const TARGET_OPTION_SIZE: usize = 20;
const TRANSIT_OFFSET: usize = DAO_HEADER_LEN + DODAG_ID_LEN + TARGET_OPTION_SIZE;

/// `D` flag in the DAO base object: DODAGID present.
const DAO_FLAG_D: u8 = 0x40;

/// Addresses are `fd00::ff:fe00:<node id>`.
const ADDRESS_PREFIX: [u8; 14] = [
    0xfd, 0x00, 0, 0, 0, 0, 0, 0, 0x00, 0x00, 0x00, 0xff, 0xfe, 0x00,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("option truncated: need {needed} bytes, have {have}")]
    TruncatedOption { needed: usize, have: usize },
    #[error("unrecognized option type {0:#04x}")]
    BadOptionType(u8),
    #[error("unexpected option length {0}")]
    BadOptionLength(u8),
    #[error("rank field is zero")]
    ZeroRank,
    #[error("address is not a node address")]
    BadAddress,
    #[error("path control flags {0:#04x} exceed 7 bits")]
    BadFlags(u8),
}

/// Which DAO layout is being sized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DaoFormat {
    /// Unmodified RPL DAO.
    Base,
    /// DAO carrying parent rank, rank and MAC in the Transit option.
    Leader,
    /// Competing sink-based IDS format; size only, not encoded.
    Sbids,
}

impl DaoFormat {
    pub fn size(self) -> usize {
        match self {
            DaoFormat::Base => TRANSIT_OFFSET + 2 + BASE_TRANSIT_LEN as usize,
            DaoFormat::Leader => TRANSIT_OFFSET + EXT_TRANSIT_SIZE,
            DaoFormat::Sbids => 80,
        }
    }
}

pub const LEADER_DAO_SIZE: usize = TRANSIT_OFFSET + EXT_TRANSIT_SIZE;

pub fn node_address(id: NodeId) -> [u8; 16] {
    let mut addr = [0u8; 16];
    addr[..14].copy_from_slice(&ADDRESS_PREFIX);
    addr[14..].copy_from_slice(&id.0.to_be_bytes());
    addr
}

pub fn address_node(addr: &[u8; 16]) -> Result<NodeId, WireError> {
    if addr[..14] != ADDRESS_PREFIX {
        return Err(WireError::BadAddress);
    }
    Ok(NodeId(u16::from_be_bytes([addr[14], addr[15]])))
}

/// Transit Information option extended with parent rank, rank and MAC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitInfoExt {
    option_type: u8,
    option_length: u8,
    pub external: bool,
    flags: u8,
    pub path_control: u8,
    pub path_sequence: u8,
    pub path_lifetime: u8,
    pub parent_address: [u8; 16],
    pub parent_rank: Rank,
    pub rank: Rank,
    pub mac: MacTag,
}

impl TransitInfoExt {
    pub fn new(parent: NodeId, parent_rank: Rank, rank: Rank, mac: MacTag) -> Self {
        TransitInfoExt {
            option_type: TRANSIT_OPTION_TYPE,
            option_length: EXT_TRANSIT_LEN,
            external: false,
            flags: 0,
            path_control: 0,
            path_sequence: 0,
            path_lifetime: 0xff,
            parent_address: node_address(parent),
            parent_rank,
            rank,
            mac,
        }
    }

    pub fn option_type(&self) -> u8 {
        self.option_type
    }

    pub fn option_length(&self) -> u8 {
        self.option_length
    }

    pub fn flags(&self) -> u8 {
        self.flags
    }

    pub fn set_flags(&mut self, flags: u8) -> Result<(), WireError> {
        if flags & 0x80 != 0 {
            return Err(WireError::BadFlags(flags));
        }
        self.flags = flags;
        Ok(())
    }

    pub fn parent(&self) -> Result<NodeId, WireError> {
        address_node(&self.parent_address)
    }
}

pub fn encode_transit(option: &TransitInfoExt) -> Vec<u8> {
    let mut out = Vec::with_capacity(EXT_TRANSIT_SIZE);
    write_transit(option, &mut out);
    out
}

fn write_transit(option: &TransitInfoExt, out: &mut Vec<u8>) {
    out.push(option.option_type);
    out.push(option.option_length);
    out.push(((option.external as u8) << 7) | option.flags);
    out.push(option.path_control);
    out.push(option.path_sequence);
    out.push(option.path_lifetime);
    out.extend_from_slice(&option.parent_address);
    out.extend_from_slice(&option.parent_rank.get().to_be_bytes());
    out.extend_from_slice(&option.rank.get().to_be_bytes());
    out.extend_from_slice(option.mac.bytes());
}

fn need(bytes: &[u8], needed: usize) -> Result<(), WireError> {
    if bytes.len() < needed {
        Err(WireError::TruncatedOption {
            needed,
            have: bytes.len(),
        })
    } else {
        Ok(())
    }
}

fn read_rank(bytes: &[u8]) -> Result<Rank, WireError> {
    Rank::new(u16::from_be_bytes([bytes[0], bytes[1]])).map_err(|_| WireError::ZeroRank)
}

/// Decodes an extended Transit option. The MAC is not checked here.
pub fn decode_transit(bytes: &[u8]) -> Result<TransitInfoExt, WireError> {
    need(bytes, 2)?;
    if bytes[0] != TRANSIT_OPTION_TYPE {
        return Err(WireError::BadOptionType(bytes[0]));
    }
    if bytes[1] != EXT_TRANSIT_LEN {
        return Err(WireError::BadOptionLength(bytes[1]));
    }
    need(bytes, EXT_TRANSIT_SIZE)?;

    let mut parent_address = [0u8; 16];
    parent_address.copy_from_slice(&bytes[6..22]);
    let mut mac = [0u8; 12];
    mac.copy_from_slice(&bytes[26..38]);

    Ok(TransitInfoExt {
        option_type: bytes[0],
        option_length: bytes[1],
        external: bytes[2] & 0x80 != 0,
        flags: bytes[2] & 0x7f,
        path_control: bytes[3],
        path_sequence: bytes[4],
        path_lifetime: bytes[5],
        parent_address,
        parent_rank: read_rank(&bytes[22..24])?,
        rank: read_rank(&bytes[24..26])?,
        mac: MacTag(mac),
    })
}

/// A DAO carrying the extended Transit option.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DaoMessage {
    pub instance_id: u8,
    pub sequence: u8,
    pub dodag_root: NodeId,
    pub origin: NodeId,
    pub target_parent: NodeId,
    pub transit: TransitInfoExt,
}

impl DaoMessage {
    pub fn new(origin: NodeId, root: NodeId, sequence: u8, transit: TransitInfoExt) -> Self {
        // Parent address inside the option is authoritative.
        let target_parent = transit.parent().unwrap_or_default();
        DaoMessage {
            instance_id: 0,
            sequence,
            dodag_root: root,
            origin,
            target_parent,
            transit,
        }
    }

    pub fn path_sequence(&self) -> u8 {
        self.transit.path_sequence
    }

    pub fn encoded_len(&self) -> usize {
        LEADER_DAO_SIZE
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(LEADER_DAO_SIZE);
        out.push(self.instance_id);
        out.push(DAO_FLAG_D);
        out.push(0);
        out.push(self.sequence);
        out.extend_from_slice(&node_address(self.dodag_root));
        out.push(TARGET_OPTION_TYPE);
        out.push((TARGET_OPTION_SIZE - 2) as u8);
        out.push(0);
        out.push(128);
        out.extend_from_slice(&node_address(self.origin));
        let mut transit = self.transit;
        transit.parent_address = node_address(self.target_parent);
        write_transit(&transit, &mut out);
        debug_assert_eq!(out.len(), LEADER_DAO_SIZE);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        need(bytes, TRANSIT_OFFSET)?;
        let mut root = [0u8; 16];
        root.copy_from_slice(&bytes[4..20]);
        let target = &bytes[DAO_HEADER_LEN + DODAG_ID_LEN..TRANSIT_OFFSET];
        if target[0] != TARGET_OPTION_TYPE {
            return Err(WireError::BadOptionType(target[0]));
        }
        if target[1] as usize != TARGET_OPTION_SIZE - 2 {
            return Err(WireError::BadOptionLength(target[1]));
        }
        let mut origin = [0u8; 16];
        origin.copy_from_slice(&target[4..20]);
        let transit = decode_transit(&bytes[TRANSIT_OFFSET..])?;
        Ok(DaoMessage {
            instance_id: bytes[0],
            sequence: bytes[3],
            dodag_root: address_node(&root)?,
            origin: address_node(&origin)?,
            target_parent: transit.parent()?,
            transit,
        })
    }
}

pub fn dao_total_size(dao: &DaoMessage) -> usize {
    dao.encoded_len()
}
