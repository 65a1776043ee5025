//! Plain-text result table: one row per tested sector with the p-value at
//! three decimals, followed by comment lines for sectors that were skipped.

pub struct TableRow {
    pub sector: String,
    pub p_value: f64,
    pub n_amd: u64,
    pub n_bmd: u64,
}

pub struct SkippedRow {
    pub sector: String,
    pub reason: String,
}

pub fn render(rows: &[TableRow], skipped: &[SkippedRow]) -> String {
    let header = ["Sector", "p-value", "N_AMD", "N_BMD"];
    let cells: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            [
                r.sector.clone(),
                format!("{:.3}", r.p_value),
                r.n_amd.to_string(),
                r.n_bmd.to_string(),
            ]
        })
        .collect();
    let mut width = header.map(str::len);
    for row in &cells {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }

    let mut out = String::new();
    out.push_str(&format!(
        "{:<w0$} | {:>w1$} | {:>w2$} | {:>w3$}\n",
        header[0],
        header[1],
        header[2],
        header[3],
        w0 = width[0],
        w1 = width[1],
        w2 = width[2],
        w3 = width[3],
    ));
    for row in &cells {
        out.push_str(&format!(
            "{:<w0$} | {:>w1$} | {:>w2$} | {:>w3$}\n",
            row[0],
            row[1],
            row[2],
            row[3],
            w0 = width[0],
            w1 = width[1],
            w2 = width[2],
            w3 = width[3],
        ));
    }
    for s in skipped {
        out.push_str(&format!("# {}: {}\n", s.sector, s.reason));
    }
    out
}
