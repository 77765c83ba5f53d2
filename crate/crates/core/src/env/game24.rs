//! Game24: combine numbers pairwise with `+ - * /` until one remains; the
//! episode is won iff that number is exactly 24.
//!
//! All arithmetic is exact (`Ratio<i64>`, always reduced with a positive
//! denominator); negative and fractional intermediates are allowed.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use num_rational::Ratio;

use super::{EnvError, Environment};

pub type Rational = Ratio<i64>;

pub fn render(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rational(s: &str) -> Option<Rational> {
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.parse().ok()?;
            let d: i64 = d.parse().ok()?;
            (d != 0).then(|| Rational::new(n, d))
        }
        None => s.parse::<i64>().ok().map(Rational::from_integer),
    }
}

fn render_all(numbers: &[Rational]) -> String {
    numbers.iter().map(render).collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Debug)]
pub struct Game24State {
    numbers: Vec<Rational>,
    pub history: Vec<String>,
}

/// States compare by their number multiset; `history` is informational.
impl PartialEq for Game24State {
    fn eq(&self, other: &Self) -> bool {
        self.numbers == other.numbers
    }
}

impl Eq for Game24State {}

impl fmt::Display for Game24State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_all(&self.numbers))
    }
}

impl Game24State {
    pub fn new(mut numbers: Vec<Rational>) -> Self {
        numbers.sort();
        Self {
            numbers,
            history: Vec::new(),
        }
    }

    pub fn from_ints(numbers: &[i64]) -> Self {
        Self::new(numbers.iter().copied().map(Rational::from_integer).collect())
    }

    /// Parses the canonical text form, e.g. `"3/2 6 6"`.
    pub fn parse(text: &str) -> Result<Self, EnvError> {
        let numbers = text
            .split_whitespace()
            .map(parse_rational)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| EnvError::BadState(text.to_string()))?;
        if numbers.is_empty() || numbers.len() > 4 {
            return Err(EnvError::BadState(text.to_string()));
        }
        Ok(Self::new(numbers))
    }

    pub fn numbers(&self) -> &[Rational] {
        &self.numbers
    }

    pub fn is_terminal(&self) -> bool {
        self.numbers.len() == 1
    }

    pub fn canonical_text(&self) -> String {
        render_all(&self.numbers)
    }

    /// 1 iff the single remaining number is exactly 24.
    pub fn reward(&self) -> Result<f64, EnvError> {
        if !self.is_terminal() {
            return Err(EnvError::NotTerminal(self.canonical_text()));
        }
        Ok(if self.numbers[0] == Rational::from_integer(24) {
            1.0
        } else {
            0.0
        })
    }

    /// Every distinct successor, each labelled `"x op y = z (left: ...)"`.
    pub fn legal_actions(&self) -> Vec<(String, Game24State)> {
        let mut out: Vec<(String, Game24State)> = Vec::new();
        let n = self.numbers.len();
        if n < 2 {
            return out;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (x, y) = (self.numbers[i], self.numbers[j]);
                let rest: Vec<Rational> = self
                    .numbers
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i && k != j)
                    .map(|(_, v)| *v)
                    .collect();
                for (a, op, b, z) in pair_results(x, y) {
                    let mut next = rest.clone();
                    next.push(z);
                    let mut next = Game24State::new(next);
                    if out.iter().any(|(_, s)| *s == next) {
                        continue;
                    }
                    let text = format!(
                        "{} {} {} = {} (left: {})",
                        render(&a),
                        op,
                        render(&b),
                        render(&z),
                        next.canonical_text()
                    );
                    next.history = self.history.clone();
                    next.history.push(text.clone());
                    out.push((text, next));
                }
            }
        }
        out
    }
}

fn pair_results(x: Rational, y: Rational) -> Vec<(Rational, char, Rational, Rational)> {
    let zero = Rational::from_integer(0);
    let mut v = vec![
        (x, '+', y, x + y),
        (x, '*', y, x * y),
        (x, '-', y, x - y),
        (y, '-', x, y - x),
    ];
    if y != zero {
        v.push((x, '/', y, x / y));
    }
    if x != zero {
        v.push((y, '/', x, y / x));
    }
    v
}

/// Exhaustive solver: can `numbers` be combined into exactly 24?
pub fn solvable(numbers: &[Rational]) -> bool {
    let mut memo = HashMap::new();
    solvable_memo(&Game24State::new(numbers.to_vec()), &mut memo)
}

fn solvable_memo(state: &Game24State, memo: &mut HashMap<Vec<Rational>, bool>) -> bool {
    if state.is_terminal() {
        return state.numbers[0] == Rational::from_integer(24);
    }
    if let Some(&hit) = memo.get(&state.numbers) {
        return hit;
    }
    let result = state.legal_actions().iter().any(|(_, next)| solvable_memo(next, memo));
    memo.insert(state.numbers.clone(), result);
    result
}

/// The Game24 environment. Stateless; the puzzle lives in the state.
#[derive(Debug, Clone, Copy, Default)]
pub struct Game24;

impl Environment for Game24 {
    type State = Game24State;

    fn canonical_text(&self, state: &Game24State) -> String {
        state.canonical_text()
    }

    fn is_terminal(&self, state: &Game24State) -> bool {
        state.is_terminal()
    }

    fn reward(&self, state: &Game24State) -> f64 {
        state.reward().unwrap_or(0.0)
    }

    fn step(&self, state: &Game24State, action: &str) -> Result<Game24State, EnvError> {
        state
            .legal_actions()
            .into_iter()
            .find(|(text, _)| text == action)
            .map(|(_, next)| next)
            .ok_or_else(|| EnvError::UnknownAction {
                state: state.canonical_text(),
                action: action.to_string(),
            })
    }
}

/// Parses a problem list: one instance per line, four space-separated integers.
/// Blank lines and `#` comments are skipped.
pub fn parse_problems(text: &str) -> Result<Vec<[i64; 4]>, EnvError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Vec<i64> = line
            .split_whitespace()
            .map(|t| t.parse::<i64>())
            .collect::<Result<_, _>>()
            .map_err(|e| EnvError::BadProblem {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        let arr: [i64; 4] = nums.try_into().map_err(|v: Vec<i64>| EnvError::BadProblem {
            line: idx + 1,
            reason: format!("expected 4 integers, found {}", v.len()),
        })?;
        out.push(arr);
    }
    Ok(out)
}

pub fn load_problems(path: &Path) -> std::io::Result<Vec<[i64; 4]>> {
    let text = std::fs::read_to_string(path)?;
    parse_problems(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
