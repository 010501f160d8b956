//! Tabular datasets: numeric encoding, temporal train/test splits and CSV
//! persistence.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{
    observation_from_codes, schema_default, FeatureId, FeatureKind, FeatureSchema, MatDim,
    MatVector, Observation, Sample,
};
use crate::error::{Error, Result};

/// Column order of the CSV format.
pub const CSV_HEADER: [&str; 20] = [
    "patient_id",
    "age",
    "gender",
    "motivation_at_enrollment",
    "affect",
    "cognitive_load",
    "motion",
    "location",
    "time_of_day",
    "day_of_week",
    "activity_type",
    "dose",
    "delivery_schedule",
    "message_phrasing",
    "message_content",
    "mat_m",
    "mat_a",
    "mat_t",
    "behaviour",
    "day_index",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Behaviour,
    Motivation,
    Ability,
    Trigger,
}

impl LabelKind {
    pub fn of(dim: MatDim) -> Self {
        match dim {
            MatDim::Motivation => LabelKind::Motivation,
            MatDim::Ability => LabelKind::Ability,
            MatDim::Trigger => LabelKind::Trigger,
        }
    }

    /// Declared label domain of the task.
    pub fn classes(self) -> Vec<u32> {
        match self {
            LabelKind::Behaviour => vec![0, 1],
            _ => (0..=4).collect(),
        }
    }

    pub fn label(self, sample: &Sample) -> Result<u32> {
        let dim = match self {
            LabelKind::Behaviour => return Ok(sample.behaviour.into()),
            LabelKind::Motivation => MatDim::Motivation,
            LabelKind::Ability => MatDim::Ability,
            LabelKind::Trigger => MatDim::Trigger,
        };
        sample
            .mat
            .map(|m| u32::from(m.get(dim)))
            .ok_or(Error::MissingMat)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub rows: Vec<Sample>,
    pub label_kind: LabelKind,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, rows: Vec<Sample>, label_kind: LabelKind) -> Self {
        Dataset {
            schema,
            rows,
            label_kind,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn with_schema(&self, schema: FeatureSchema, label_kind: LabelKind) -> Dataset {
        Dataset::new(schema, self.rows.clone(), label_kind)
    }

    pub fn labels(&self) -> Result<Vec<u32>> {
        self.rows.iter().map(|s| self.label_kind.label(s)).collect()
    }

    pub fn positive_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let positives = self.rows.iter().filter(|s| s.behaviour == 1).count();
        positives as f64 / self.rows.len() as f64
    }

    pub fn patient_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.rows.iter().map(Sample::patient_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Rows grouped per patient, each group ordered by day.
    pub fn by_patient(&self) -> BTreeMap<u32, Vec<Sample>> {
        let mut groups: BTreeMap<u32, Vec<Sample>> = BTreeMap::new();
        for row in &self.rows {
            groups.entry(row.patient_id()).or_default().push(*row);
        }
        for rows in groups.values_mut() {
            rows.sort_by_key(|s| s.day_index);
        }
        groups
    }

    /// Encodes with a freshly fitted encoder.
    pub fn encode(&self) -> Result<(Encoder, EncodedMatrix)> {
        let encoder = Encoder::fit(self)?;
        let matrix = encoder.encode(self)?;
        Ok((encoder, matrix))
    }
}

/// Row-major numeric feature matrix with its label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub feature_names: Vec<String>,
    pub n_cols: usize,
    pub values: Vec<f64>,
    pub labels: Vec<u32>,
}

impl EncodedMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<u32>) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch(rows.len(), labels.len()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch {
                expected: n_cols,
                got: bad.len(),
            });
        }
        Ok(EncodedMatrix {
            feature_names: (0..n_cols).map(|i| format!("x{i}")).collect(),
            n_cols,
            values: rows.into_iter().flatten().collect(),
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols.max(1)).take(self.n_rows())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Block {
    start: usize,
    width: usize,
}

/// Maps feature codes to numeric columns: ordinals pass through, nominal
/// features become one-hot blocks in level order, identifiers become a
/// one-hot block over the ids seen at fit time (unknown ids encode as zeros).
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    schema: FeatureSchema,
    id_levels: Vec<u32>,
    blocks: Vec<Block>,
    columns: Vec<String>,
}

impl Encoder {
    pub fn fit(dataset: &Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self::with_ids(dataset.schema.clone(), dataset.patient_ids()))
    }

    pub fn with_ids(schema: FeatureSchema, mut id_levels: Vec<u32>) -> Self {
        id_levels.sort_unstable();
        id_levels.dedup();
        let mut blocks = Vec::with_capacity(schema.len());
        let mut columns = Vec::new();
        for f in schema.features() {
            let start = columns.len();
            match f.kind {
                FeatureKind::Ordinal => columns.push(f.name().to_string()),
                FeatureKind::Nominal => {
                    for code in f.domain.codes().expect("nominal domain") {
                        columns.push(format!("{}={}", f.name(), f.id.render(code)));
                    }
                }
                FeatureKind::Identifier => {
                    for id in &id_levels {
                        columns.push(format!("{}={id}", f.name()));
                    }
                }
            }
            blocks.push(Block {
                start,
                width: columns.len() - start,
            });
        }
        Encoder {
            schema,
            id_levels,
            blocks,
            columns,
        }
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn id_levels(&self) -> &[u32] {
        &self.id_levels
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Appends the encoding of one code vector to `out`.
    pub fn encode_codes_into(&self, codes: &[u32], out: &mut Vec<f64>) -> Result<()> {
        self.schema.validate_codes(codes)?;
        for ((f, block), &code) in self.schema.features().iter().zip(&self.blocks).zip(codes) {
            match f.kind {
                FeatureKind::Ordinal => out.push(f64::from(code)),
                FeatureKind::Nominal => {
                    out.extend((0..block.width as u32).map(|c| if c == code { 1.0 } else { 0.0 }))
                }
                FeatureKind::Identifier => {
                    out.extend(
                        self.id_levels
                            .iter()
                            .map(|&id| if id == code { 1.0 } else { 0.0 }),
                    );
                }
            }
        }
        Ok(())
    }

    pub fn encode_codes(&self, codes: &[u32]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.width());
        self.encode_codes_into(codes, &mut out)?;
        Ok(out)
    }

    pub fn encode(&self, dataset: &Dataset) -> Result<EncodedMatrix> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut values = Vec::with_capacity(dataset.len() * self.width());
        let mut labels = Vec::with_capacity(dataset.len());
        for sample in &dataset.rows {
            let codes = self.schema.codes(sample)?;
            self.encode_codes_into(&codes, &mut values)?;
            labels.push(dataset.label_kind.label(sample)?);
        }
        Ok(EncodedMatrix {
            feature_names: self.columns.clone(),
            n_cols: self.width(),
            values,
            labels,
        })
    }

    /// Inverse of [`encode_codes`](Self::encode_codes) on valid rows.
    pub fn decode(&self, row: &[f64]) -> Result<Vec<u32>> {
        if row.len() != self.width() {
            return Err(Error::DimensionMismatch {
                expected: self.width(),
                got: row.len(),
            });
        }
        let hot = |f: FeatureId, cells: &[f64]| -> Result<usize> {
            let ones: Vec<usize> = cells
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == 1.0)
                .map(|(i, _)| i)
                .collect();
            match ones.as_slice() {
                [i] if cells.iter().all(|&v| v == 0.0 || v == 1.0) => Ok(*i),
                _ => Err(Error::schema(f.name(), "one-hot block is not a unit vector")),
            }
        };
        self.schema
            .features()
            .iter()
            .zip(&self.blocks)
            .map(|(f, block)| {
                let cells = &row[block.start..block.start + block.width];
                let code = match f.kind {
                    FeatureKind::Ordinal => {
                        let v = cells[0];
                        if v.fract() != 0.0 || v < 0.0 {
                            return Err(Error::schema(f.name(), format!("{v} is not a level")));
                        }
                        v as u32
                    }
                    FeatureKind::Nominal => hot(f.id, cells)? as u32,
                    FeatureKind::Identifier => self.id_levels[hot(f.id, cells)?],
                };
                f.id.check(code)?;
                Ok(code)
            })
            .collect()
    }
}

/// Encodes a dataset with a freshly fitted encoder.
pub fn encode(dataset: &Dataset) -> Result<EncodedMatrix> {
    dataset.encode().map(|(_, m)| m)
}

/// A train/test pair.
#[derive(Debug, Clone)]
pub struct Split {
    pub train_size: usize,
    pub train: Dataset,
    pub test: Dataset,
}

/// Temporal splits applied per patient and pooled: the test set is each
/// patient's last `test_size` days, the k-th train set their first
/// `train_sizes[k]` days. Train sets are nested prefixes.
pub fn incremental_split(
    dataset: &Dataset,
    train_sizes: &[usize],
    test_size: usize,
) -> Result<Vec<Split>> {
    let groups = dataset.by_patient();
    if groups.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let largest = train_sizes.iter().copied().max().unwrap_or(0);
    for (&patient_id, rows) in &groups {
        if rows.len() < largest + test_size {
            return Err(Error::InsufficientRows {
                patient_id,
                needed: largest + test_size,
                available: rows.len(),
            });
        }
    }
    let test: Vec<Sample> = groups
        .values()
        .flat_map(|rows| rows[rows.len() - test_size..].iter().copied())
        .collect();
    let test = Dataset::new(dataset.schema.clone(), test, dataset.label_kind);
    Ok(train_sizes
        .iter()
        .map(|&n| {
            let train = groups
                .values()
                .flat_map(|rows| rows[..n].iter().copied())
                .collect();
            Split {
                train_size: n,
                train: Dataset::new(dataset.schema.clone(), train, dataset.label_kind),
                test: test.clone(),
            }
        })
        .collect())
}

fn csv_record(sample: &Sample) -> Vec<String> {
    let schema = schema_default();
    let mut fields: Vec<String> = schema
        .ids()
        .map(|id| {
            let code = crate::domain::observation_code(&sample.observation, id)
                .expect("observation feature");
            id.render(code)
        })
        .collect();
    match sample.mat {
        Some(m) => fields.extend([m.motivation, m.ability, m.trigger].map(|v| v.to_string())),
        None => fields.extend(std::iter::repeat(String::new()).take(3)),
    }
    fields.push(sample.behaviour.to_string());
    fields.push(sample.day_index.to_string());
    fields
}

pub fn write_csv_to<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    writeln!(out, "{}", CSV_HEADER.join(","))?;
    for sample in &dataset.rows {
        writeln!(out, "{}", csv_record(sample).join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_csv_to(dataset, BufWriter::new(File::create(path)?))
}

fn parse_row(record: &csv::StringRecord) -> Result<Sample> {
    if record.len() != CSV_HEADER.len() {
        return Err(Error::schema(
            "row",
            format!("expected {} fields, found {}", CSV_HEADER.len(), record.len()),
        ));
    }
    let schema = schema_default();
    let codes = schema
        .ids()
        .zip(record.iter())
        .map(|(id, text)| id.parse(text))
        .collect::<Result<Vec<u32>>>()?;
    let observation = observation_from_codes(&schema, &codes, &Observation::blank())?;

    let mat_fields = [&record[15], &record[16], &record[17]];
    let mat = if mat_fields.iter().all(|f| f.is_empty()) {
        None
    } else {
        let level = |id: FeatureId, text: &str| -> Result<u8> { Ok(id.parse(text)? as u8) };
        Some(MatVector {
            motivation: level(FeatureId::MatM, mat_fields[0])?,
            ability: level(FeatureId::MatA, mat_fields[1])?,
            trigger: level(FeatureId::MatT, mat_fields[2])?,
        })
    };
    let behaviour = match &record[18] {
        "0" => 0,
        "1" => 1,
        other => {
            return Err(Error::schema(
                "behaviour",
                format!("`{other}` is not 0 or 1"),
            ))
        }
    };
    let day_index = record[19]
        .parse()
        .map_err(|_| Error::schema("day_index", format!("`{}` is not an integer", &record[19])))?;
    Ok(Sample {
        observation,
        mat,
        behaviour,
        day_index,
    })
}

pub fn read_csv_from<R: Read>(input: R) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(Error::MissingHeader),
        Some(r) => r.map_err(|e| csv_error(e, 1))?,
    };
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header, expected `{}`", CSV_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        let sample = parse_row(&record).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        rows.push(sample);
    }
    Ok(Dataset::new(schema_default(), rows, LabelKind::Behaviour))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    read_csv_from(File::open(path)?)
}

fn csv_error(err: csv::Error, fallback_line: u64) -> Error {
    let line = err.position().map_or(fallback_line, |p| p.line());
    Error::Parse {
        line,
        message: err.to_string(),
    }
}
