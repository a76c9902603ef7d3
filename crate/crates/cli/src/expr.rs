//! Arithmetic expressions from scenario files.
//!
//! Expressions use `evalexpr` syntax: `^` is a power, builtins live under
//! `math::` (`math::exp`, `math::sin`, ...), and `if(cond, a, b)` selects.
//! Integer literals stay integers, so write `0.5` rather than `1/2`.

use evalexpr::{build_operator_tree, Context, DefaultNumericTypes, EvalexprError, EvalexprResult, Node, Value};

type Numeric = DefaultNumericTypes;

/// A parsed expression over a fixed list of variable names.
#[derive(Debug, Clone)]
pub struct Expression {
    source: String,
    tree: Node<Numeric>,
    names: &'static [&'static str],
}

struct Slots<'a> {
    names: &'static [&'static str],
    values: &'a [Value<Numeric>],
}

impl Context for Slots<'_> {
    type NumericTypes = Numeric;

    fn get_value(&self, identifier: &str) -> Option<&Value<Numeric>> {
        self.names.iter().position(|n| *n == identifier).map(|i| &self.values[i])
    }

    fn call_function(&self, identifier: &str, _argument: &Value<Numeric>) -> EvalexprResult<Value<Numeric>, Numeric> {
        Err(EvalexprError::FunctionIdentifierNotFound(identifier.to_string()))
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(&mut self, disabled: bool) -> EvalexprResult<(), Numeric> {
        if disabled {
            Err(EvalexprError::CustomMessage("builtin functions cannot be disabled".into()))
        } else {
            Ok(())
        }
    }
}

impl Expression {
    /// Parse `source` and check that it reads only `names`. A trial
    /// evaluation at `probe` catches unknown functions and non-numeric results.
    pub fn parse(source: &str, names: &'static [&'static str], probe: &[f64]) -> Result<Self, String> {
        let tree = build_operator_tree::<Numeric>(source).map_err(|e| format!("cannot parse `{source}`: {e}"))?;
        if let Some(bad) = tree.iter_read_variable_identifiers().find(|v| !names.contains(v)) {
            return Err(format!(
                "unknown variable `{bad}` in `{source}`; available: {}",
                names.join(", ")
            ));
        }
        let expr = Self {
            source: source.to_string(),
            tree,
            names,
        };
        expr.eval(probe).map_err(|e| format!("cannot evaluate `{source}`: {e}"))?;
        Ok(expr)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluate with `values` bound to the names in order.
    pub fn eval(&self, values: &[f64]) -> EvalexprResult<f64, Numeric> {
        debug_assert_eq!(values.len(), self.names.len());
        let values: Vec<Value<Numeric>> = values.iter().map(|&v| Value::Float(v)).collect();
        let ctx = Slots {
            names: self.names,
            values: &values,
        };
        self.tree.eval_number_with_context(&ctx)
    }

    /// Like [`Expression::eval`], with evaluation errors mapped to NaN.
    pub fn eval_or_nan(&self, values: &[f64]) -> f64 {
        self.eval(values).unwrap_or(f64::NAN)
    }
}
