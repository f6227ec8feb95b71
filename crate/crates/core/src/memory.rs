use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{FabricError, Result};
use crate::topology::{ChipCoord, PeId};

/// 2 GiB of DRAM per chip.
pub const DRAM_BYTES: u64 = 2 << 30;

const PAGE_BITS: u32 = 16;
const PAGE_SIZE: usize = 1 << PAGE_BITS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemRef {
    Sram { pe: PeId, addr: u32 },
    Dram { chip: ChipCoord, addr: u64 },
}

impl MemRef {
    pub fn sram(pe: PeId, addr: u32) -> Self {
        MemRef::Sram { pe, addr }
    }

    pub fn dram(chip: ChipCoord, addr: u64) -> Self {
        MemRef::Dram { chip, addr }
    }

    pub fn pe(&self) -> Option<PeId> {
        match self {
            MemRef::Sram { pe, .. } => Some(*pe),
            MemRef::Dram { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DmaRequest {
    pub src: MemRef,
    pub dst: MemRef,
    pub len: u64,
}

pub(crate) fn check_range(addr: u64, len: u64, size: u64) -> Result<()> {
    match addr.checked_add(len) {
        Some(end) if end <= size => Ok(()),
        _ => Err(FabricError::OutOfBounds { addr, len, size }),
    }
}

/// Sparse byte store for one chip's DRAM; untouched pages read as zero.
#[derive(Clone, Debug, Default)]
pub struct Dram {
    pages: BTreeMap<u64, Box<[u8]>>,
}

impl Dram {
    pub fn read(&self, addr: u64, len: u64) -> Result<Vec<u8>> {
        check_range(addr, len, DRAM_BYTES)?;
        let mut out = vec![0u8; len as usize];
        let mut done = 0usize;
        while done < out.len() {
            let a = addr + done as u64;
            let page = a >> PAGE_BITS;
            let off = (a as usize) & (PAGE_SIZE - 1);
            let n = (PAGE_SIZE - off).min(out.len() - done);
            if let Some(p) = self.pages.get(&page) {
                out[done..done + n].copy_from_slice(&p[off..off + n]);
            }
            done += n;
        }
        Ok(out)
    }

    pub fn write(&mut self, addr: u64, data: &[u8]) -> Result<()> {
        check_range(addr, data.len() as u64, DRAM_BYTES)?;
        let mut done = 0usize;
        while done < data.len() {
            let a = addr + done as u64;
            let page = a >> PAGE_BITS;
            let off = (a as usize) & (PAGE_SIZE - 1);
            let n = (PAGE_SIZE - off).min(data.len() - done);
            let p = self
                .pages
                .entry(page)
                .or_insert_with(|| vec![0u8; PAGE_SIZE].into_boxed_slice());
            p[off..off + n].copy_from_slice(&data[done..done + n]);
            done += n;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dram_spans_pages() {
        let mut d = Dram::default();
        let data: Vec<u8> = (0..200u32).map(|i| i as u8).collect();
        let addr = (PAGE_SIZE - 50) as u64;
        d.write(addr, &data).unwrap();
        assert_eq!(d.read(addr, 200).unwrap(), data);
        assert_eq!(d.read(0, 4).unwrap(), vec![0; 4]);
    }

    #[test]
    fn dram_bounds() {
        let mut d = Dram::default();
        assert!(d.write(DRAM_BYTES - 4, &[1, 2, 3, 4]).is_ok());
        assert!(matches!(
            d.write(DRAM_BYTES - 3, &[1, 2, 3, 4]),
            Err(FabricError::OutOfBounds { .. })
        ));
        assert!(d.read(u64::MAX, 2).is_err());
    }
}
