use std::path::Path;

use landmark_core::embeddings::{fishbowl, uneven_line};
use landmark_core::synthetic::{gaussian_matrix, random_diagonal_psd, random_psd};
use landmark_core::{KernelMatrix, PointCloud, RandomSeed};
use nalgebra::DMatrix;

use crate::config::{DatasetSpec, KernelSpec};
use crate::error::{BenchError, Result};

#[derive(Debug, Clone)]
pub enum Dataset {
    Points(PointCloud),
    Kernel(KernelMatrix),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Points(x) => x.len(),
            Dataset::Kernel(q) => q.order(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kernel(&self, spec: Option<&KernelSpec>) -> Result<KernelMatrix> {
        match (self, spec) {
            (Dataset::Kernel(q), _) => Ok(q.clone()),
            (Dataset::Points(x), Some(spec)) => Ok(spec.build(x)?),
            (Dataset::Points(_), None) => Err(BenchError::config("point datasets need a kernel")),
        }
    }
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    let data = match *spec {
        DatasetSpec::Fishbowl {
            n_points,
            cap_z,
            seed,
        } => Dataset::Points(fishbowl(n_points, cap_z, RandomSeed::new(seed))?),
        DatasetSpec::UnevenLine { n_points, seed } => {
            Dataset::Points(uneven_line(n_points, RandomSeed::new(seed))?)
        }
        DatasetSpec::Gaussian {
            n_points,
            dim,
            seed,
        } => {
            let mut rng = RandomSeed::new(seed).rng();
            Dataset::Points(PointCloud::new(gaussian_matrix(n_points, dim, &mut rng))?)
        }
        DatasetSpec::LowRank { n, rank, seed } => {
            if rank == 0 {
                return Err(BenchError::config("`kernel_rank` must be at least 1"));
            }
            Dataset::Kernel(random_psd(n, rank, &mut RandomSeed::new(seed).rng()))
        }
        DatasetSpec::Diagonal { n, seed } => {
            Dataset::Kernel(random_diagonal_psd(n, &mut RandomSeed::new(seed).rng()))
        }
        DatasetSpec::Csv {
            ref path,
            header,
            tag_column,
        } => Dataset::Points(read_point_cloud(path, header, tag_column)?),
    };
    Ok(data)
}

/// One point per row. With `tag_column` the last column becomes the tag.
pub fn read_point_cloud(path: &Path, header: bool, tag_column: bool) -> Result<PointCloud> {
    let csv_err = |source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        if width.is_some_and(|w| w != record.len()) {
            return Err(BenchError::config(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                rows + 1,
                record.len(),
                width.unwrap_or_default()
            )));
        }
        width = Some(record.len());
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| {
                BenchError::config(format!(
                    "{}: row {}: `{field}` is not a number",
                    path.display(),
                    rows + 1
                ))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| BenchError::config(format!("{}: no rows", path.display())))?;
    let coords = if tag_column { width - 1 } else { width };
    if coords == 0 {
        return Err(BenchError::config(format!(
            "{}: no coordinate columns",
            path.display()
        )));
    }
    let all = DMatrix::from_row_slice(rows, width, &values);
    let points = PointCloud::new(all.columns(0, coords).into_owned())?;
    if tag_column {
        Ok(points.with_tags(all.columns(coords, 1).into_owned())?)
    } else {
        Ok(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn reads_csv_with_header_and_tags() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "x,y,tag\n0,1,0.5\n2,3,0.25\n4,5,1").unwrap();
        let x = read_point_cloud(file.path(), true, true).unwrap();
        assert_eq!((x.len(), x.dim()), (3, 2));
        assert_eq!(x.points()[(1, 1)], 3.0);
        assert_eq!(x.primary_tag().unwrap(), vec![0.5, 0.25, 1.0]);

        let y = read_point_cloud(file.path(), false, false);
        assert!(matches!(y, Err(BenchError::Config(_))));
    }

    #[test]
    fn rejects_ragged_rows() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "0,1\n2,3,4").unwrap();
        assert!(read_point_cloud(file.path(), false, false).is_err());
    }

    #[test]
    fn synthetic_datasets_have_requested_size() {
        let d = load_dataset(&DatasetSpec::LowRank {
            n: 12,
            rank: 3,
            seed: 1,
        })
        .unwrap();
        assert_eq!(d.len(), 12);
        let d = load_dataset(&DatasetSpec::Fishbowl {
            n_points: 30,
            cap_z: 0.5,
            seed: 1,
        })
        .unwrap();
        assert_eq!(d.len(), 30);
        assert!(d.kernel(None).is_err());
    }
}
