//! Recursive-descent parser, one function per grammar rule:
//!
//! ```text
//! expr  := let | sum
//! let   := "let" IDENT "=" expr "in" expr
//! sum   := prod (("+"|"-") prod)*
//! prod  := unary (("*"|"/") unary)*
//! unary := "-" unary | pow
//! pow   := atom ("^" unary)?
//! atom  := NUMBER | IDENT | IDENT "(" args? ")" | IDENT "[" expr "]" | "(" expr ")"
//! args  := expr ("," expr)*
//! ```

use super::ast::{BinOp, Expr, ExprKind, Pos};
use super::error::MeasureError;
use super::lexer::{tokenize, Tok, Token};

/// Parses a complete measure expression.
pub fn parse(source: &str) -> Result<Expr, MeasureError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, at: 0 };
    let e = p.expr()?;
    p.expect(Tok::Eof, "end of input")?;
    Ok(e)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if t.tok != Tok::Eof {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> MeasureError {
        let t = self.peek();
        MeasureError::syntax(
            t.pos,
            format!("expected {expected}, found {}", t.tok.describe()),
            Some(expected.to_string()),
        )
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Pos, MeasureError> {
        if self.peek().tok == tok {
            Ok(self.bump().pos)
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), MeasureError> {
        match &self.peek().tok {
            Tok::Ident(name) => {
                let name = name.clone();
                let pos = self.bump().pos;
                Ok((name, pos))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn expr(&mut self) -> Result<Expr, MeasureError> {
        if self.peek().tok == Tok::Let {
            self.let_expr()
        } else {
            self.sum()
        }
    }

    fn let_expr(&mut self) -> Result<Expr, MeasureError> {
        let pos = self.bump().pos;
        let (name, _) = self.ident()?;
        self.expect(Tok::Eq, "`=`")?;
        let value = self.expr()?;
        self.expect(Tok::In, "`in`")?;
        let body = self.expr()?;
        Ok(Expr::new(
            ExprKind::Let {
                name,
                value: Box::new(value),
                body: Box::new(body),
            },
            pos,
        ))
    }

    fn sum(&mut self) -> Result<Expr, MeasureError> {
        let mut lhs = self.prod()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let pos = self.bump().pos;
            let rhs = self.prod()?;
            lhs = binary(op, lhs, rhs, pos);
        }
    }

    fn prod(&mut self) -> Result<Expr, MeasureError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            let pos = self.bump().pos;
            let rhs = self.unary()?;
            lhs = binary(op, lhs, rhs, pos);
        }
    }

    fn unary(&mut self) -> Result<Expr, MeasureError> {
        if self.peek().tok == Tok::Minus {
            let pos = self.bump().pos;
            let inner = self.unary()?;
            return Ok(Expr::new(ExprKind::Neg(Box::new(inner)), pos));
        }
        self.pow()
    }

    fn pow(&mut self) -> Result<Expr, MeasureError> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Caret {
            let pos = self.bump().pos;
            let exp = self.unary()?;
            return Ok(binary(BinOp::Pow, base, exp, pos));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, MeasureError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Number(n) => {
                self.bump();
                Ok(Expr::new(ExprKind::Number(n), t.pos))
            }
            Tok::Ident(name) => {
                self.bump();
                match self.peek().tok {
                    Tok::LParen => {
                        self.bump();
                        let mut args = Vec::new();
                        if self.peek().tok != Tok::RParen {
                            args.push(self.expr()?);
                            while self.peek().tok == Tok::Comma {
                                self.bump();
                                args.push(self.expr()?);
                            }
                        }
                        self.expect(Tok::RParen, "`,` or `)`")?;
                        Ok(Expr::new(ExprKind::Call { name, args }, t.pos))
                    }
                    Tok::LBracket => {
                        self.bump();
                        let index = self.expr()?;
                        self.expect(Tok::RBracket, "`]`")?;
                        Ok(Expr::new(
                            ExprKind::Index {
                                target: name,
                                index: Box::new(index),
                            },
                            t.pos,
                        ))
                    }
                    _ => Ok(Expr::new(ExprKind::Ident(name), t.pos)),
                }
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

fn binary(op: BinOp, lhs: Expr, rhs: Expr, pos: Pos) -> Expr {
    Expr::new(
        ExprKind::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        },
        pos,
    )
}
