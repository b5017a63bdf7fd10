//! CSV datasets and the TOML registry that describes them.
//!
//! A registry file holds one `[[dataset]]` table per dataset:
//!
//! ```toml
//! [[dataset]]
//! name = "iris"
//! path = "iris.csv"        # relative to the registry file
//! k = 3
//! n_features = 4
//! label_column = "last"    # or a 0-based column index
//! delimiter = ","          # optional, default ","
//! has_header = true        # optional, default true
//!
//! [dataset.subsample]      # optional stratified subsample
//! count = 1000
//! seed = 0
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classic::PointMatrix;
use crate::encoding::RawDataset;
use crate::error::{Error, Result};
use crate::seed::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LabelColumnRepr", into = "LabelColumnRepr")]
pub enum LabelColumn {
    Index(usize),
    Last,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LabelColumnRepr {
    Index(usize),
    Name(String),
}

impl TryFrom<LabelColumnRepr> for LabelColumn {
    type Error = String;

    fn try_from(r: LabelColumnRepr) -> std::result::Result<Self, String> {
        match r {
            LabelColumnRepr::Index(i) => Ok(Self::Index(i)),
            LabelColumnRepr::Name(s) if s == "last" => Ok(Self::Last),
            LabelColumnRepr::Name(s) => Err(format!("label_column must be an index or \"last\", got {s:?}")),
        }
    }
}

impl From<LabelColumn> for LabelColumnRepr {
    fn from(c: LabelColumn) -> Self {
        match c {
            LabelColumn::Index(i) => Self::Index(i),
            LabelColumn::Last => Self::Name("last".into()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsample {
    pub count: usize,
    pub seed: u64,
}

fn default_delimiter() -> char {
    ','
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub path: PathBuf,
    pub k: usize,
    pub n_features: usize,
    pub label_column: LabelColumn,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_true")]
    pub has_header: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<Subsample>,
}

impl DatasetSpec {
    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!("dataset {}: k must be at least 2", self.name)));
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::Config(format!("dataset {}: delimiter must be ASCII", self.name)));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RegistryFile {
    #[serde(default)]
    dataset: Vec<DatasetSpec>,
}

/// Named dataset specs with paths resolved against the registry location.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Registry {
    specs: Vec<DatasetSpec>,
}

impl Registry {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Relative dataset paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let file: RegistryFile = toml::from_str(text)?;
        let mut seen = HashMap::new();
        let mut specs = Vec::with_capacity(file.dataset.len());
        for mut spec in file.dataset {
            spec.validate()?;
            if seen.insert(spec.name.clone(), ()).is_some() {
                return Err(Error::Config(format!("dataset {} registered twice", spec.name)));
            }
            if spec.path.is_relative() {
                spec.path = base.join(&spec.path);
            }
            specs.push(spec);
        }
        Ok(Self { specs })
    }

    pub fn get(&self, name: &str) -> Result<&DatasetSpec> {
        self.specs
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::UnknownDataset(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.specs.iter().map(|s| s.name.as_str())
    }
}

/// Reads, validates and optionally subsamples a dataset.
///
/// Labels become dense integers in order of first appearance. Row numbers
/// in errors are 1-based file lines; column numbers are 1-based.
pub fn load(spec: &DatasetSpec) -> Result<RawDataset> {
    spec.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter as u8)
        .has_headers(spec.has_header)
        .trim(csv::Trim::All)
        .from_path(&spec.path)?;

    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let width = record.len();
        let label_at = match spec.label_column {
            LabelColumn::Last => width.saturating_sub(1),
            LabelColumn::Index(i) => i,
        };
        if width != spec.n_features + 1 {
            if label_at >= width {
                return Err(Error::MissingLabel {
                    path: spec.path.clone(),
                    row,
                });
            }
            return Err(Error::SchemaMismatch {
                dataset: spec.name.clone(),
                detail: format!("line {row} has {} features, expected {}", width - 1, spec.n_features),
            });
        }
        for (c, field) in record.iter().enumerate() {
            if c == label_at {
                if field.is_empty() {
                    return Err(Error::MissingLabel {
                        path: spec.path.clone(),
                        row,
                    });
                }
                let next = label_ids.len();
                labels.push(*label_ids.entry(field.to_string()).or_insert(next));
                continue;
            }
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                path: spec.path.clone(),
                row,
                column: c + 1,
                value: field.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteFeature { row, column: c + 1 });
            }
            data.push(value);
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("dataset has no rows"));
    }
    if label_ids.len() > spec.k {
        return Err(Error::SchemaMismatch {
            dataset: spec.name.clone(),
            detail: format!("{} distinct labels, expected at most {}", label_ids.len(), spec.k),
        });
    }
    let features = PointMatrix::new(labels.len(), spec.n_features, data)?;
    let dataset = RawDataset::new(spec.name.clone(), features, labels, spec.k)?;
    match spec.subsample {
        None => Ok(dataset),
        Some(s) => {
            let picked = stratified_indices(&dataset.labels, spec.k, s.count, s.seed)?;
            Ok(dataset.subset(&picked))
        }
    }
}

/// Sorted indices of a seeded, class-proportional sample of `count` rows.
///
/// Each class receives the floor of its exact share; leftover slots go to the
/// largest fractional remainders (lower class id first on ties). Members are
/// drawn by shuffling each class with a stream seeded by `seed`.
pub fn stratified_indices(labels: &[usize], k: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    let n = labels.len();
    if count == 0 || count > n {
        return Err(Error::InsufficientSamples { needed: count, got: n });
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members
            .get_mut(l)
            .ok_or(Error::LabelOutOfRange { label: l, k })?
            .push(i);
    }
    let mut alloc: Vec<usize> = members.iter().map(|m| m.len() * count / n).collect();
    let mut leftover = count - alloc.iter().sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..k).collect();
    by_remainder.sort_by_key(|&c| (std::cmp::Reverse(members[c].len() * count % n), c));
    for &c in by_remainder.iter().cycle() {
        if leftover == 0 {
            break;
        }
        if alloc[c] < members[c].len() {
            alloc[c] += 1;
            leftover -= 1;
        }
    }

    let mut rng = RngStream::new(seed);
    let mut picked = Vec::with_capacity(count);
    for (m, &take) in members.iter_mut().zip(&alloc) {
        rng.shuffle(m);
        picked.extend_from_slice(&m[..take]);
    }
    picked.sort_unstable();
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn spec_for(path: &Path, k: usize, n: usize) -> DatasetSpec {
        DatasetSpec {
            name: "t".into(),
            path: path.to_path_buf(),
            k,
            n_features: n,
            label_column: LabelColumn::Last,
            delimiter: ',',
            has_header: true,
            subsample: None,
        }
    }

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_and_maps_labels_by_first_appearance() {
        let f = write("a,b,c\n1,2,x\n3,4,y\n5,6,x\n");
        let d = load(&spec_for(f.path(), 2, 2)).unwrap();
        assert_eq!(d.labels, vec![0, 1, 0]);
        assert_eq!(d.features.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn label_index_and_delimiter() {
        let f = write("B;1.5;2\nM;0;1\n");
        let mut s = spec_for(f.path(), 2, 2);
        s.label_column = LabelColumn::Index(0);
        s.delimiter = ';';
        s.has_header = false;
        let d = load(&s).unwrap();
        assert_eq!(d.labels, vec![0, 1]);
        assert_eq!(d.features.row(0), &[1.5, 2.0]);
    }

    #[test]
    fn parse_error_names_row_and_column() {
        let f = write("a,b,y\n1,2,0\n1.0,abc,3\n");
        match load(&spec_for(f.path(), 3, 2)) {
            Err(Error::Parse { row, column, value, .. }) => assert_eq!((row, column, value.as_str()), (3, 2, "abc")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_and_label_errors() {
        let f = write("a,b,y\n1,2,0\n3,4,1\n5,6,2\n");
        assert!(matches!(load(&spec_for(f.path(), 2, 2)), Err(Error::SchemaMismatch { .. })));
        assert!(matches!(load(&spec_for(f.path(), 3, 3)), Err(Error::SchemaMismatch { .. })));
        let missing = write("a,b,y\n1,2,\n");
        assert!(matches!(load(&spec_for(missing.path(), 2, 2)), Err(Error::MissingLabel { .. })));
        let nan = write("a,b,y\n1,NaN,0\n");
        assert!(matches!(load(&spec_for(nan.path(), 2, 2)), Err(Error::NonFiniteFeature { .. })));
    }

    #[test]
    fn registry_resolves_paths_and_rejects_bad_specs() {
        let text = r#"
            [[dataset]]
            name = "x"
            path = "x.csv"
            k = 3
            n_features = 4
            label_column = "last"

            [[dataset]]
            name = "y"
            path = "/abs/y.csv"
            k = 2
            n_features = 1
            label_column = 0
            [dataset.subsample]
            count = 10
            seed = 3
        "#;
        let r = Registry::parse(text, Path::new("/base")).unwrap();
        assert_eq!(r.get("x").unwrap().path, PathBuf::from("/base/x.csv"));
        let y = r.get("y").unwrap();
        assert_eq!((y.label_column, y.subsample), (LabelColumn::Index(0), Some(Subsample { count: 10, seed: 3 })));
        assert!(matches!(r.get("z"), Err(Error::UnknownDataset(_))));

        let bad_k = "[[dataset]]\nname='a'\npath='a'\nk=1\nn_features=1\nlabel_column='last'\n";
        assert!(Registry::parse(bad_k, Path::new(".")).is_err());
        let bad_col = "[[dataset]]\nname='a'\npath='a'\nk=2\nn_features=1\nlabel_column='first'\n";
        assert!(Registry::parse(bad_col, Path::new(".")).is_err());
    }

    #[test]
    fn stratified_sample_is_proportional_and_seeded() {
        let labels: Vec<usize> = (0..100).map(|i| if i < 50 { 0 } else if i < 80 { 1 } else { 2 }).collect();
        let a = stratified_indices(&labels, 3, 33, 5).unwrap();
        assert_eq!(a, stratified_indices(&labels, 3, 33, 5).unwrap());
        assert_ne!(a, stratified_indices(&labels, 3, 33, 6).unwrap());
        assert_eq!(a.len(), 33);
        let counts: Vec<usize> = (0..3).map(|c| a.iter().filter(|&&i| labels[i] == c).count()).collect();
        for (c, &exact) in [16.5, 9.9, 6.6].iter().enumerate() {
            assert!((counts[c] as f64 - exact).abs() <= 1.0, "{counts:?}");
        }
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(stratified_indices(&labels, 3, 101, 0).is_err());
        assert_eq!(stratified_indices(&labels, 3, 100, 0).unwrap(), (0..100).collect::<Vec<_>>());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn stratified_subsample_keeps_class_shares(
                labels in proptest::collection::vec(0usize..4, 4..200),
                fraction in 0.05f64..1.0,
                seed in any::<u64>(),
            ) {
                let n = labels.len();
                let count = ((n as f64 * fraction) as usize).max(1);
                let idx = stratified_indices(&labels, 4, count, seed).unwrap();
                prop_assert_eq!(idx.len(), count);
                prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(idx.iter().all(|&i| i < n));
                for class in 0..4 {
                    let total = labels.iter().filter(|&&l| l == class).count();
                    let kept = idx.iter().filter(|&&i| labels[i] == class).count();
                    let share = count as f64 * total as f64 / n as f64;
                    prop_assert!((kept as f64 - share).abs() < 1.0 + 1e-9, "class {class}: {kept} vs {share}");
                }
                prop_assert_eq!(idx, stratified_indices(&labels, 4, count, seed).unwrap());
            }
        }
    }
}
