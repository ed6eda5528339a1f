use sfrkit::format::fmt_sig;

/// CSV under construction; cells are formatted as they are pushed.
pub struct Table {
    out: String,
    width: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut out = header.join(",");
        out.push('\n');
        Self {
            out,
            width: header.len(),
        }
    }

    /// Numeric row; `None` leaves the cell empty.
    pub fn row<I: IntoIterator<Item = Option<f64>>>(&mut self, cells: I) {
        let cells: Vec<String> = cells.into_iter().map(|c| c.map(fmt_sig).unwrap_or_default()).collect();
        debug_assert_eq!(cells.len(), self.width);
        self.out.push_str(&cells.join(","));
        self.out.push('\n');
    }

    pub fn values(&mut self, cells: &[f64]) {
        self.row(cells.iter().map(|v| Some(*v)));
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// Traces that share one time grid, written side by side.
pub fn traces_csv(dt: f64, columns: &[(&str, &[f64])]) -> String {
    let mut header = vec!["t_s"];
    header.extend(columns.iter().map(|(name, _)| *name));
    let mut t = Table::new(&header);
    let n = columns.iter().map(|(_, v)| v.len()).min().unwrap_or(0);
    for i in 0..n {
        let mut row = vec![i as f64 * dt];
        row.extend(columns.iter().map(|(_, v)| v[i]));
        t.values(&row);
    }
    t.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_rows() {
        let mut t = Table::new(&["a", "b"]);
        t.values(&[1.0, 0.5]);
        t.row([Some(2.0), None]);
        assert_eq!(t.finish(), "a,b\n1,0.5\n2,\n");
    }

    #[test]
    fn side_by_side() {
        let csv = traces_csv(0.1, &[("x", &[0.0, 1.0, 2.0]), ("y", &[3.0, 4.0])]);
        assert_eq!(csv, "t_s,x,y\n0,0,3\n0.1,1,4\n");
    }
}
