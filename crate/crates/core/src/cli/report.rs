use std::fmt::Write as _;

/// Plain `key = value` report grouped into `[sections]`.
#[derive(Debug, Default, Clone)]
pub struct Report {
    text: String,
}

/// Shortest round-trip form, with `-0` printed as `0`.
pub fn num(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:?}")
}

pub fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|&x| num(x)).collect();
    format!("[{}]", items.join(", "))
}

fn quote(s: &str) -> String {
    format!("{s:?}")
}

impl Report {
    pub fn new(title: &str) -> Self {
        let mut r = Self::default();
        let _ = writeln!(r.text, "# {title}");
        r
    }

    pub fn section(&mut self, name: &str) -> &mut Self {
        let _ = writeln!(self.text, "\n[{name}]");
        self
    }

    pub fn raw(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.text, "{key} = {value}");
        self
    }

    pub fn num(&mut self, key: &str, x: f64) -> &mut Self {
        self.raw(key, num(x))
    }

    pub fn list(&mut self, key: &str, v: &[f64]) -> &mut Self {
        self.raw(key, list(v))
    }

    pub fn str(&mut self, key: &str, s: &str) -> &mut Self {
        self.raw(key, quote(s))
    }

    pub fn strings(&mut self, key: &str, items: &[String]) -> &mut Self {
        let q: Vec<String> = items.iter().map(|s| quote(s)).collect();
        self.raw(key, format!("[{}]", q.join(", ")))
    }

    pub fn finish(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting() {
        assert_eq!(num(-0.0), "0.0");
        assert_eq!(num(0.1), "0.1");
        assert_eq!(list(&[1.0, -2.5]), "[1.0, -2.5]");
        let mut r = Report::new("t");
        r.section("a").num("x", 1.5).str("s", "q\"");
        assert_eq!(r.finish(), "# t\n\n[a]\nx = 1.5\ns = \"q\\\"\"\n");
    }
}
