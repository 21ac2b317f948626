//! Minimal s-expression reader with source positions.

use super::ModelIoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items, _) => Some(items),
            Sexp::Atom(..) => None,
        }
    }

    /// The leading atom of a list, e.g. `mode` in `(mode q0 ...)`.
    pub fn head(&self) -> Option<&str> {
        self.list()?.first()?.atom()
    }
}

pub fn error_at(pos: Pos, message: impl Into<String>) -> ModelIoError {
    ModelIoError::Syntax { line: pos.line, col: pos.col, message: message.into() }
}

/// Reads every top-level expression of `text`.
pub fn read_all(text: &str) -> Result<Vec<Sexp>, ModelIoError> {
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    let mut top = Vec::new();
    let (mut line, mut col) = (1usize, 0usize);
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        col += 1;
        let here = Pos { line, col };
        match c {
            '\n' => {
                line += 1;
                col = 0;
            }
            ';' => {
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => stack.push((Vec::new(), here)),
            ')' => {
                let (items, start) = stack.pop().ok_or_else(|| error_at(here, "unbalanced `)`"))?;
                let node = Sexp::List(items, start);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(node),
                    None => top.push(node),
                }
            }
            c if c.is_whitespace() => {}
            c => {
                let mut tok = String::from(c);
                while let Some(&n) = chars.peek() {
                    if n.is_whitespace() || n == '(' || n == ')' || n == ';' {
                        break;
                    }
                    tok.push(n);
                    chars.next();
                    col += 1;
                }
                let node = Sexp::Atom(tok, here);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(node),
                    None => top.push(node),
                }
            }
        }
    }
    if let Some((_, start)) = stack.pop() {
        return Err(error_at(start, "unclosed `(`"));
    }
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_lists_and_comments() {
        let t = read_all("; header\n(a (b c) d) ; tail\n(e)").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].head(), Some("a"));
        assert_eq!(t[0].list().unwrap()[1].list().unwrap().len(), 2);
        assert_eq!(t[1].pos(), Pos { line: 3, col: 1 });
    }

    #[test]
    fn unbalanced_input() {
        assert!(matches!(read_all("(a (b)"), Err(ModelIoError::Syntax { line: 1, col: 1, .. })));
        assert!(matches!(read_all("a)"), Err(ModelIoError::Syntax { line: 1, col: 2, .. })));
    }
}
