use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::DfmError;
use crate::data::{BlockKey, Country, Sector};

/// A group of factors sharing one VAR(1) transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FactorBlock {
    Global(Sector),
    Local(BlockKey),
}

impl fmt::Display for FactorBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorBlock::Global(s) => write!(f, "global-{s}"),
            FactorBlock::Local(b) => write!(f, "local-{b}"),
        }
    }
}

/// Position of a factor block inside the stacked state vector, together
/// with the panel columns that load on it.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorBlockInfo {
    pub block: FactorBlock,
    pub offset: usize,
    pub size: usize,
    pub series: Vec<usize>,
}

impl FactorBlockInfo {
    pub fn slots(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.size
    }
}

/// Factor counts per level and the block membership of every panel column.
///
/// The state vector is ordered: global factors by sector (F, M), then local
/// factors of every financial block by country, then every macro block by
/// country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStructure {
    pub r_global: BTreeMap<Sector, usize>,
    pub r_local: BTreeMap<BlockKey, usize>,
    pub series_blocks: Vec<BlockKey>,
}

impl BlockStructure {
    /// One global factor per sector, one local financial factor and two
    /// local macro factors per country (14 in total).
    pub fn baseline(series_blocks: Vec<BlockKey>) -> Self {
        Self::uniform(series_blocks, 1, 1, 1, 2)
    }

    pub fn uniform(series_blocks: Vec<BlockKey>, r_gf: usize, r_gm: usize, r_lf: usize, r_lm: usize) -> Self {
        let r_global = BTreeMap::from([(Sector::F, r_gf), (Sector::M, r_gm)]);
        let r_local = Country::ALL
            .iter()
            .flat_map(|&c| {
                [(BlockKey::new(c, Sector::F), r_lf), (BlockKey::new(c, Sector::M), r_lm)]
            })
            .collect();
        Self { r_global, r_local, series_blocks }
    }

    pub fn n_series(&self) -> usize {
        self.series_blocks.len()
    }

    pub fn r_global(&self, s: Sector) -> usize {
        self.r_global.get(&s).copied().unwrap_or(0)
    }

    pub fn r_local(&self, b: BlockKey) -> usize {
        self.r_local.get(&b).copied().unwrap_or(0)
    }

    pub fn total_factors(&self) -> usize {
        self.factor_blocks().iter().map(|b| b.size).sum()
    }

    /// Factor blocks in state order, skipping those with zero factors.
    pub fn factor_blocks(&self) -> Vec<FactorBlockInfo> {
        let mut out = Vec::new();
        let mut offset = 0;
        let mut push = |block: FactorBlock, size: usize, series: Vec<usize>| {
            if size > 0 {
                out.push(FactorBlockInfo { block, offset, size, series });
                offset += size;
            }
        };
        for s in Sector::ALL {
            let series = (0..self.n_series()).filter(|&i| self.series_blocks[i].sector == s).collect();
            push(FactorBlock::Global(s), self.r_global(s), series);
        }
        for s in Sector::ALL {
            for c in Country::ALL {
                let key = BlockKey::new(c, s);
                let series = (0..self.n_series()).filter(|&i| self.series_blocks[i] == key).collect();
                push(FactorBlock::Local(key), self.r_local(key), series);
            }
        }
        out
    }

    pub fn factor_block(&self, block: FactorBlock) -> Option<FactorBlockInfo> {
        self.factor_blocks().into_iter().find(|b| b.block == block)
    }

    /// State slots a series is allowed to load on: the global factors of its
    /// sector followed by the local factors of its block.
    pub fn permitted_slots(&self, series: usize) -> Vec<usize> {
        let key = self.series_blocks[series];
        self.factor_blocks()
            .iter()
            .filter(|b| b.block == FactorBlock::Global(key.sector) || b.block == FactorBlock::Local(key))
            .flat_map(|b| b.slots())
            .collect()
    }

    /// Labels of every state slot, e.g. `global-F`, `local-DE-M-2`.
    pub fn factor_labels(&self) -> Vec<String> {
        self.factor_blocks()
            .iter()
            .flat_map(|b| {
                (0..b.size).map(move |k| if b.size == 1 { b.block.to_string() } else { format!("{}-{}", b.block, k + 1) })
            })
            .collect()
    }

    /// Keep only the given columns (in the given order).
    pub fn restrict(&self, columns: &[usize]) -> Self {
        Self {
            r_global: self.r_global.clone(),
            r_local: self.r_local.clone(),
            series_blocks: columns.iter().map(|&j| self.series_blocks[j]).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), DfmError> {
        for s in Sector::ALL {
            for c in Country::ALL {
                let key = BlockKey::new(c, s);
                let n = self.series_blocks.iter().filter(|b| **b == key).count();
                let need = self.r_global(s) + self.r_local(key);
                if n <= need {
                    return Err(DfmError::Config(format!(
                        "block {key} has {n} series, needs more than {need} for its factor count"
                    )));
                }
            }
        }
        if self.total_factors() == 0 {
            return Err(DfmError::Config("model has no factors".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_per_block() -> Vec<BlockKey> {
        let mut v = Vec::new();
        for s in Sector::ALL {
            for c in Country::ALL {
                for _ in 0..4 {
                    v.push(BlockKey::new(c, s));
                }
            }
        }
        v
    }

    #[test]
    fn baseline_has_fourteen_factors_in_order() {
        let b = BlockStructure::baseline(two_per_block());
        assert_eq!(b.total_factors(), 14);
        let fb = b.factor_blocks();
        assert_eq!(fb[0].block, FactorBlock::Global(Sector::F));
        assert_eq!(fb[1].block, FactorBlock::Global(Sector::M));
        assert_eq!(fb[2].block, FactorBlock::Local(BlockKey::new(Country::DE, Sector::F)));
        assert_eq!(fb[6].block, FactorBlock::Local(BlockKey::new(Country::DE, Sector::M)));
        assert_eq!(fb[6].offset, 6);
        assert_eq!(fb[9].offset, 12);
        assert_eq!(fb[0].series.len(), 16);
        assert_eq!(b.factor_labels()[7], "local-DE-M-2");
    }

    #[test]
    fn permitted_slots_follow_zero_pattern() {
        let b = BlockStructure::baseline(two_per_block());
        // first IT-M series: global M (slot 1) and local IT-M (slots 12, 13)
        let i = b.series_blocks.iter().position(|k| *k == BlockKey::new(Country::IT, Sector::M)).unwrap();
        assert_eq!(b.permitted_slots(i), vec![1, 12, 13]);
        assert_eq!(b.permitted_slots(0), vec![0, 2]);
    }

    #[test]
    fn thin_block_rejected() {
        let mut v = two_per_block();
        v.retain(|k| *k != BlockKey::new(Country::FR, Sector::M));
        v.extend([BlockKey::new(Country::FR, Sector::M); 3]);
        assert!(BlockStructure::baseline(v).validate().is_err());
    }
}
