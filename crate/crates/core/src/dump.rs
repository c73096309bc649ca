//! Plain-text dump: `d`, modes, ranks, then every core in row-major order.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Result, TtError};
use crate::tt::{make_tt_operator, make_tt_vector, Core3, Core4, TTOperator, TTVector};

fn join<T: core::fmt::Display>(v: &[T]) -> String {
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{}", x);
    }
    s
}

pub fn dump_vector(x: &TTVector) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "tt-vector");
    let _ = writeln!(s, "d {}", x.d());
    let _ = writeln!(s, "modes {}", join(&x.modes()));
    let _ = writeln!(s, "ranks {}", join(&x.ranks()));
    for (k, c) in x.cores().iter().enumerate() {
        let _ = writeln!(s, "core {} {} {} {}", k + 1, c.r0, c.n, c.r1);
        for row in c.data.chunks(c.r1) {
            let cells: Vec<String> = row.iter().map(|v| alloc::format!("{:e}", v)).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
    }
    s
}

pub fn dump_operator(a: &TTOperator) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "tt-operator");
    let _ = writeln!(s, "d {}", a.d());
    let _ = writeln!(s, "row_modes {}", join(&a.row_modes()));
    let _ = writeln!(s, "col_modes {}", join(&a.col_modes()));
    let _ = writeln!(s, "ranks {}", join(&a.ranks()));
    for (k, c) in a.cores().iter().enumerate() {
        let _ = writeln!(s, "core {} {} {} {} {}", k + 1, c.r0, c.n, c.m, c.r1);
        for row in c.data.chunks(c.r1) {
            let cells: Vec<String> = row.iter().map(|v| alloc::format!("{:e}", v)).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
    }
    s
}

struct Tokens<'a> {
    it: core::str::SplitWhitespace<'a>,
}

impl<'a> Tokens<'a> {
    fn word(&mut self) -> Result<&'a str> {
        self.it.next().ok_or_else(|| TtError::Parse("unexpected end of dump".into()))
    }
    fn expect(&mut self, w: &str) -> Result<()> {
        let got = self.word()?;
        if got != w {
            return Err(TtError::Parse(alloc::format!("expected `{}`, got `{}`", w, got)));
        }
        Ok(())
    }
    fn usize(&mut self) -> Result<usize> {
        let w = self.word()?;
        w.parse().map_err(|_| TtError::Parse(alloc::format!("bad integer `{}`", w)))
    }
    fn f64(&mut self) -> Result<f64> {
        let w = self.word()?;
        w.parse().map_err(|_| TtError::Parse(alloc::format!("bad number `{}`", w)))
    }
    fn list(&mut self, n: usize) -> Result<Vec<usize>> {
        (0..n).map(|_| self.usize()).collect()
    }
}

pub fn parse_vector(text: &str) -> Result<TTVector> {
    let mut t = Tokens { it: text.split_whitespace() };
    t.expect("tt-vector")?;
    t.expect("d")?;
    let d = t.usize()?;
    t.expect("modes")?;
    let _modes = t.list(d)?;
    t.expect("ranks")?;
    let _ranks = t.list(d + 1)?;
    let mut cores = Vec::with_capacity(d);
    for _ in 0..d {
        t.expect("core")?;
        let _k = t.usize()?;
        let (r0, n, r1) = (t.usize()?, t.usize()?, t.usize()?);
        let data = (0..r0 * n * r1).map(|_| t.f64()).collect::<Result<Vec<_>>>()?;
        cores.push(Core3::new(r0, n, r1, data));
    }
    make_tt_vector(cores)
}

pub fn parse_operator(text: &str) -> Result<TTOperator> {
    let mut t = Tokens { it: text.split_whitespace() };
    t.expect("tt-operator")?;
    t.expect("d")?;
    let d = t.usize()?;
    t.expect("row_modes")?;
    let _ = t.list(d)?;
    t.expect("col_modes")?;
    let _ = t.list(d)?;
    t.expect("ranks")?;
    let _ = t.list(d + 1)?;
    let mut cores = Vec::with_capacity(d);
    for _ in 0..d {
        t.expect("core")?;
        let _k = t.usize()?;
        let (r0, n, m, r1) = (t.usize()?, t.usize()?, t.usize()?, t.usize()?);
        let data = (0..r0 * n * m * r1).map(|_| t.f64()).collect::<Result<Vec<_>>>()?;
        cores.push(Core4::new(r0, n, m, r1, data));
    }
    make_tt_operator(cores)
}
