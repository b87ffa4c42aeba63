use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

/// Column store for panel regressions. Rows are keyed by `(unit, year)`;
/// each row also carries a two-digit industry for fixed effects and
/// clustering. The unit is a firm for firm-level data and an industry for
/// industry-level data.
#[derive(Debug, Clone, Default)]
pub struct Frame {
    unit_names: Vec<String>,
    unit: Vec<u32>,
    industry: Vec<u16>,
    year: Vec<i32>,
    columns: BTreeMap<String, Vec<Option<f64>>>,
    index: HashMap<(u32, i32), usize>,
}

impl Frame {
    /// Builds the row skeleton; `(unit, year)` keys must be unique.
    pub fn new(keys: impl IntoIterator<Item = (String, u16, i32)>) -> Result<Self> {
        let mut f = Frame::default();
        let mut ids: HashMap<String, u32> = HashMap::new();
        for (name, industry, year) in keys {
            let next = ids.len() as u32;
            let id = *ids.entry(name.clone()).or_insert_with(|| {
                f.unit_names.push(name.clone());
                next
            });
            let row = f.unit.len();
            if f.index.insert((id, year), row).is_some() {
                return Err(Error::DuplicateKey { firm_id: name, year });
            }
            f.unit.push(id);
            f.industry.push(industry);
            f.year.push(year);
        }
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.unit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit.is_empty()
    }

    pub fn insert(&mut self, name: impl Into<String>, values: Vec<Option<f64>>) -> Result<()> {
        let name = name.into();
        if values.len() != self.len() {
            return Err(Error::Config(format!(
                "column `{name}` has {} values for {} rows",
                values.len(),
                self.len()
            )));
        }
        self.columns.insert(name, values);
        Ok(())
    }

    /// Inserts a 0/1 column from booleans; absent stays absent.
    pub fn insert_flag(&mut self, name: impl Into<String>, values: Vec<Option<bool>>) -> Result<()> {
        self.insert(name, values.into_iter().map(|b| b.map(|v| v as u8 as f64)).collect())
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn column(&self, name: &str) -> Result<&[Option<f64>]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    /// Value of `name` in the same unit `lag` calendar years earlier.
    pub fn lagged(&self, name: &str, lag: u32) -> Result<Vec<Option<f64>>> {
        let col = self.column(name)?;
        if lag == 0 {
            return Ok(col.to_vec());
        }
        Ok((0..self.len())
            .map(|r| {
                self.index
                    .get(&(self.unit[r], self.year[r] - lag as i32))
                    .and_then(|&p| col[p])
            })
            .collect())
    }

    pub fn unit(&self) -> &[u32] {
        &self.unit
    }

    pub fn unit_name(&self, id: u32) -> &str {
        &self.unit_names[id as usize]
    }

    pub fn industry(&self) -> &[u16] {
        &self.industry
    }

    pub fn year(&self) -> &[i32] {
        &self.year
    }

    pub fn row_of(&self, unit: u32, year: i32) -> Option<usize> {
        self.index.get(&(unit, year)).copied()
    }
}
