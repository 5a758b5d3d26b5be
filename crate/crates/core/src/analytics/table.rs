//! Plain aligned-column text tables.

pub fn num(x: f64) -> String {
    format!("{x:.2}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), num)
}

pub fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{:.1}%", v * 100.0))
}

/// First column left-aligned, the rest right-aligned.
pub fn render(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths = vec![0; cols];
    for r in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let fmt = |r: &[String]| {
        r.iter()
            .enumerate()
            .map(|(i, c)| {
                let pad = widths[i] - c.chars().count();
                if i == 0 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = fmt(header);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (cols.saturating_sub(1))));
    for r in rows {
        out.push('\n');
        out.push_str(&fmt(r));
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligns() {
        let h = vec!["".to_string(), "A".to_string()];
        let t = render(&h, &[vec!["users".into(), "17".into()], vec!["x".into(), "1".into()]]);
        assert_eq!(t, "        A\n---------\nusers  17\nx       1\n");
    }

    #[test]
    fn formats() {
        assert_eq!(num(2.0), "2.00");
        assert_eq!(opt(None), "NA");
        assert_eq!(pct(Some(0.58)), "58.0%");
    }
}
