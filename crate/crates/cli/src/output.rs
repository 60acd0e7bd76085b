use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// Six significant digits, switching to exponent form outside [1e-4, 1e6).
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{v:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(sig6).unwrap_or_else(|| "-".into())
}

pub fn json<T: Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

/// A small table printed as aligned text or CSV.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        if format == Format::Csv {
            out += &self.header.join(",");
            out.push('\n');
            for r in &self.rows {
                out += &r.join(",");
                out.push('\n');
            }
            return out;
        }
        let widths: Vec<usize> = (0..self.header.len())
            .map(|i| self.rows.iter().map(|r| r[i].chars().count()).chain([self.header[i].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: &[String]| -> String {
            cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string() + "\n"
        };
        out += &line(&self.header);
        for r in &self.rows {
            out += &line(r);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig6(0.36476198), "0.364762");
        assert_eq!(sig6(-0.75), "-0.75");
        assert_eq!(sig6(2429.087), "2429.09");
        assert_eq!(sig6(24291.44), "24291.4");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(3.2e-7), "3.20000e-7");
        assert_eq!(sig6(0.0), "0");
    }

    #[test]
    fn csv_table() {
        let mut t = Table::new(&["d", "v"]);
        t.push(vec!["2".into(), "0.707107".into()]);
        assert_eq!(t.render(Format::Csv), "d,v\n2,0.707107\n");
        assert!(t.render(Format::Text).starts_with("d  v\n"));
    }
}
