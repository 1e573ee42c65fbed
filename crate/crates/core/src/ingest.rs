//! CSV input and output, plus the preprocessing used for price data: log
//! returns, Winsorization by mean absolute deviation, standardization.

use std::io::{Read, Write};
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Reads a headed numeric CSV. Rows and columns in errors are 1-based and
/// count data rows only.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    read_csv_from(std::fs::File::open(path)?)
}

pub fn read_csv_from(reader: impl Read) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    for (k, name) in names.iter().enumerate() {
        if names[..k].contains(name) {
            return Err(Error::DuplicateColumn(name.clone()));
        }
    }
    let d = names.len();
    let mut values = Vec::new();
    let mut n = 0;
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            col: 0,
            message: e.to_string(),
        })?;
        if record.len() != d {
            return Err(Error::Parse {
                row,
                col: record.len().min(d) + 1,
                message: format!("expected {d} fields, found {}", record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                row,
                col: c + 1,
                value: cell.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    col: c + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::TooFewRows {
            needed: 1,
            found: 0,
        });
    }
    Dataset::new(names, n, values)
}

/// Writes a headed CSV using the shortest round-tripping float format.
pub fn write_csv_to(data: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(data.names())?;
    for i in 0..data.n_rows() {
        w.write_record(data.row(i).iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_csv_to(data, std::fs::File::create(path)?)
}

/// Row-wise `log(S_t / S_{t−1})`.
pub fn log_returns(prices: &Dataset) -> Result<Dataset> {
    let (n, d) = (prices.n_rows(), prices.n_cols());
    if n < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            found: n,
        });
    }
    for i in 0..n {
        for (j, &v) in prices.row(i).iter().enumerate() {
            if !(v > 0.0) {
                return Err(Error::NonPositivePrice {
                    row: i + 1,
                    col: j + 1,
                    value: v,
                });
            }
        }
    }
    let mut values = Vec::with_capacity((n - 1) * d);
    for i in 1..n {
        let (prev, cur) = (prices.row(i - 1), prices.row(i));
        values.extend(cur.iter().zip(prev).map(|(c, p)| (c / p).ln()));
    }
    Dataset::new(prices.names().to_vec(), n - 1, values)
}

/// Output of [`winsorize_mad`].
#[derive(Debug, Clone, PartialEq)]
pub struct Winsorized {
    pub data: Dataset,
    /// Columns whose deviation was zero and were left untouched.
    pub constant_columns: Vec<usize>,
}

/// Clips each column to `mean ± c · MAD`, with MAD the mean absolute
/// deviation about the mean. One pass.
pub fn winsorize_mad(data: &Dataset, c: f64) -> Result<Winsorized> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!(
            "winsorization multiple must be positive, got {c}"
        )));
    }
    let n = data.n_rows() as f64;
    let mut bands = Vec::with_capacity(data.n_cols());
    let mut constant_columns = Vec::new();
    for j in 0..data.n_cols() {
        let col = data.column(j);
        let mu = col.iter().sum::<f64>() / n;
        let mad = col.iter().map(|x| (x - mu).abs()).sum::<f64>() / n;
        if mad > 0.0 {
            bands.push(Some((mu - c * mad, mu + c * mad)));
        } else {
            bands.push(None);
            constant_columns.push(j);
        }
    }
    let data = data.map(|j, x| match bands[j] {
        Some((lo, hi)) => x.clamp(lo, hi),
        None => x,
    });
    Ok(Winsorized {
        data,
        constant_columns,
    })
}

/// Centers each column and scales it to unit standard deviation (divisor n).
pub fn standardize(data: &Dataset) -> Result<Dataset> {
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::TooFewRows {
            needed: 1,
            found: 0,
        });
    }
    let mut stats = Vec::with_capacity(data.n_cols());
    for j in 0..data.n_cols() {
        let col = data.column(j);
        let mu = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n as f64).sqrt();
        if !(sd > 0.0) {
            return Err(Error::ConstantColumn(j));
        }
        stats.push((mu, sd));
    }
    Ok(data.map(|j, x| (x - stats[j].0) / stats[j].1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset> {
        read_csv_from(s.as_bytes())
    }

    #[test]
    fn reads_well_formed_file() {
        let d = parse("a,b\n1,2.5\n").unwrap();
        assert_eq!((d.n_rows(), d.n_cols()), (1, 2));
        assert_eq!(d.names(), ["a", "b"]);
        assert_eq!(d.row(0), [1.0, 2.5]);
    }

    #[test]
    fn read_errors() {
        assert!(matches!(parse("a,b\n"), Err(Error::TooFewRows { .. })));
        match parse("a,b\n1,2\n3,abc\n") {
            Err(Error::NonNumericCell { row, col, value }) => {
                assert_eq!((row, col, value.as_str()), (2, 2, "abc"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse("a,a\n1,2\n"),
            Err(Error::DuplicateColumn(_))
        ));
        assert!(matches!(
            parse("a,b\n1,NaN\n"),
            Err(Error::Parse { row: 1, col: 2, .. })
        ));
        assert!(matches!(
            parse("a,b\ninf,1\n"),
            Err(Error::Parse { row: 1, col: 1, .. })
        ));
        assert!(matches!(
            parse("a,b\n1,2,3\n"),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn csv_roundtrip() {
        let d = Dataset::from_named_columns(
            vec!["x".into(), "y".into()],
            &[vec![0.1, 1e-300, -3.0], vec![1.0 / 3.0, 2.5e10, 0.0]],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv_to(&d, &mut buf).unwrap();
        assert_eq!(read_csv_from(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn returns() {
        let p = Dataset::from_columns(&[vec![100.0, 110.0, 121.0], vec![5.0, 5.0, 5.0]]).unwrap();
        let r = log_returns(&p).unwrap();
        assert_eq!(r.n_rows(), 2);
        assert!((r.get(0, 0) - 0.095_310_179_804_324_9).abs() < 1e-12);
        assert_eq!(r.column(1), vec![0.0, 0.0]);

        // exp-cumsum reconstructs the prices.
        let mut s = p.get(0, 0);
        for i in 0..2 {
            s *= r.get(i, 0).exp();
            assert!((s - p.get(i + 1, 0)).abs() < 1e-10 * s);
        }

        let bad = Dataset::from_columns(&[vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            log_returns(&bad),
            Err(Error::NonPositivePrice { row: 2, col: 1, .. })
        ));
    }

    #[test]
    fn winsorize_hand_example() {
        let mut col = vec![0.0; 9];
        col.push(30.0);
        let d =
            Dataset::from_columns(&[col, vec![1.0; 10], (0..10).map(f64::from).collect()]).unwrap();
        let w = winsorize_mad(&d, 3.0).unwrap();
        assert!((w.data.get(9, 0) - 19.2).abs() < 1e-12);
        assert_eq!(w.data.get(0, 0), 0.0);
        assert_eq!(w.constant_columns, vec![1]);
        assert_eq!(w.data.column(2), d.column(2));
    }

    #[test]
    fn standardize_cases() {
        let d = Dataset::from_columns(&[vec![0.0, 2.0]]).unwrap();
        assert_eq!(standardize(&d).unwrap().column(0), vec![-1.0, 1.0]);

        let x = vec![1.0, 4.0, -2.0, 7.5, 0.3];
        let z = standardize(&Dataset::from_columns(std::slice::from_ref(&x)).unwrap()).unwrap();
        let again = standardize(&z).unwrap();
        for (a, b) in z.column(0).iter().zip(again.column(0)) {
            assert!((a - b).abs() < 1e-12);
        }
        let mean: f64 = z.column(0).iter().sum::<f64>() / 5.0;
        let var: f64 = z.column(0).iter().map(|v| v * v).sum::<f64>() / 5.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);

        let neg: Vec<f64> = x.iter().map(|v| -2.0 * v + 3.0).collect();
        let zn = standardize(&Dataset::from_columns(&[neg]).unwrap()).unwrap();
        for (a, b) in z.column(0).iter().zip(zn.column(0)) {
            assert!((a + b).abs() < 1e-12);
        }
        let c = Dataset::from_columns(&[vec![1.0, 1.0]]).unwrap();
        assert!(matches!(standardize(&c), Err(Error::ConstantColumn(0))));
    }
}
