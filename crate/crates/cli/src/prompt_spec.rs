//! The `--prompt` mini-language:
//!
//! ```text
//! point:x,y,z
//! box:x,y,z,w,h,l[,rot=a,b,g]
//! mask:@path/to/mask.txt
//! ```
//!
//! Coordinates are in the input cloud's own units; angles are radians.

use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptSpecError {
    #[error("prompt must start with point:, box: or mask: (got `{0}`)")]
    UnknownKind(String),
    #[error("{kind} prompt needs {expected} numbers, got {got}")]
    Arity {
        kind: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("`{0}` is not a finite number")]
    BadNumber(String),
    #[error("mask prompt must be mask:@<file>")]
    BadMask,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PromptSpec {
    Point([f64; 3]),
    Box {
        center: [f64; 3],
        dims: [f64; 3],
        rotation: [f64; 3],
    },
    Mask(PathBuf),
}

fn numbers(text: &str) -> Result<Vec<f64>, PromptSpecError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| PromptSpecError::BadNumber(t.to_string()))
        })
        .collect()
}

fn triple(v: &[f64]) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

impl FromStr for PromptSpec {
    type Err = PromptSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("point:") {
            let v = numbers(rest)?;
            if v.len() != 3 {
                return Err(PromptSpecError::Arity {
                    kind: "point",
                    expected: "3",
                    got: v.len(),
                });
            }
            return Ok(PromptSpec::Point(triple(&v)));
        }
        if let Some(rest) = s.strip_prefix("box:") {
            let (main, rot) = match rest.split_once(",rot=") {
                Some((m, r)) => (m, Some(r)),
                None => (rest, None),
            };
            let v = numbers(main)?;
            if v.len() != 6 {
                return Err(PromptSpecError::Arity {
                    kind: "box",
                    expected: "6",
                    got: v.len(),
                });
            }
            let rotation = match rot {
                None => [0.0; 3],
                Some(r) => {
                    let a = numbers(r)?;
                    if a.len() != 3 {
                        return Err(PromptSpecError::Arity {
                            kind: "box rotation",
                            expected: "3",
                            got: a.len(),
                        });
                    }
                    triple(&a)
                }
            };
            return Ok(PromptSpec::Box {
                center: triple(&v[..3]),
                dims: triple(&v[3..]),
                rotation,
            });
        }
        if let Some(rest) = s.strip_prefix("mask:") {
            return match rest.strip_prefix('@') {
                Some(path) if !path.is_empty() => Ok(PromptSpec::Mask(PathBuf::from(path))),
                _ => Err(PromptSpecError::BadMask),
            };
        }
        Err(PromptSpecError::UnknownKind(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_kind() {
        assert_eq!("point:0.5,0.5,0.5".parse(), Ok(PromptSpec::Point([0.5; 3])));
        assert_eq!(
            "box:0.5,0.5,0.5,0.2,0.2,0.2,rot=0,0,0.785".parse(),
            Ok(PromptSpec::Box {
                center: [0.5; 3],
                dims: [0.2; 3],
                rotation: [0.0, 0.0, 0.785],
            })
        );
        assert_eq!(
            "box:1,2,3,4,5,6".parse(),
            Ok(PromptSpec::Box {
                center: [1.0, 2.0, 3.0],
                dims: [4.0, 5.0, 6.0],
                rotation: [0.0; 3],
            })
        );
        assert_eq!("mask:@sel.txt".parse(), Ok(PromptSpec::Mask("sel.txt".into())));
    }

    #[test]
    fn rejects_malformed_specs() {
        assert!(matches!("point:1,2".parse::<PromptSpec>(), Err(PromptSpecError::Arity { got: 2, .. })));
        assert!(matches!("point:1,x,2".parse::<PromptSpec>(), Err(PromptSpecError::BadNumber(_))));
        assert!(matches!("point:1,inf,2".parse::<PromptSpec>(), Err(PromptSpecError::BadNumber(_))));
        assert!(matches!("box:1,2,3,4,5,6,rot=1".parse::<PromptSpec>(), Err(PromptSpecError::Arity { .. })));
        assert!(matches!("box:1,2,3,4,5,6,7".parse::<PromptSpec>(), Err(PromptSpecError::Arity { .. })));
        assert_eq!("mask:sel.txt".parse::<PromptSpec>(), Err(PromptSpecError::BadMask));
        assert!(matches!("sphere:1".parse::<PromptSpec>(), Err(PromptSpecError::UnknownKind(_))));
    }
}
