//! Scalar test functions evaluated on point coordinates.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::groups::GroupKind;
use crate::quotients::QuotientTag;

pub type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// The space a test function lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Group(GroupKind),
    Quotient(QuotientTag),
}

/// A scalar function together with optional analytic horizontal derivatives.
///
/// `eval` receives the coordinate vector of a point (see
/// [`GroupPoint::coords`](crate::groups::GroupPoint::coords) and
/// [`QuotientPoint::coords`](crate::quotients::QuotientPoint)). When present,
/// `analytic_grad` returns one entry per horizontal frame field; on a
/// quotient the `i`-th entry is the derivative along the pushforward of the
/// `i`-th group frame field.
#[derive(Clone)]
pub struct TestFunction {
    id: String,
    domain: Domain,
    eval: EvalFn,
    analytic_grad: Option<GradFn>,
    support_radius: Option<f64>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("id", &self.id)
            .field("domain", &self.domain)
            .field("analytic_grad", &self.analytic_grad.is_some())
            .field("support_radius", &self.support_radius)
            .finish()
    }
}

impl TestFunction {
    pub fn new<F>(id: impl Into<String>, domain: Domain, eval: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        TestFunction {
            id: id.into(),
            domain,
            eval: Arc::new(eval),
            analytic_grad: None,
            support_radius: None,
        }
    }

    pub fn with_grad<G>(mut self, grad: G) -> Self
    where
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.analytic_grad = Some(Arc::new(grad));
        self
    }

    pub fn with_support_radius(mut self, r: f64) -> Self {
        self.support_radius = Some(r);
        self
    }

    /// Same function with the analytic derivative removed, forcing finite
    /// differences.
    pub fn without_grad(&self) -> Self {
        TestFunction {
            analytic_grad: None,
            ..self.clone()
        }
    }

    /// `c · f`, with the gradient scaled accordingly.
    pub fn scaled(&self, c: f64) -> Self {
        let eval = self.eval.clone();
        let grad = self.analytic_grad.clone();
        TestFunction {
            id: format!("{}*{}", c, self.id),
            domain: self.domain,
            eval: Arc::new(move |p| c * eval(p)),
            analytic_grad: grad.map(|g| -> GradFn {
                Arc::new(move |p| g(p).into_iter().map(|v| c * v).collect())
            }),
            support_radius: self.support_radius,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    pub fn has_analytic_grad(&self) -> bool {
        self.analytic_grad.is_some()
    }

    #[inline]
    pub fn eval(&self, coords: &[f64]) -> f64 {
        (self.eval)(coords)
    }

    pub fn analytic_grad(&self, coords: &[f64]) -> Option<Vec<f64>> {
        self.analytic_grad.as_ref().map(|g| g(coords))
    }

    pub(crate) fn eval_fn(&self) -> EvalFn {
        self.eval.clone()
    }

    pub(crate) fn grad_fn(&self) -> Option<GradFn> {
        self.analytic_grad.clone()
    }

    pub(crate) fn from_parts(
        id: String,
        domain: Domain,
        eval: EvalFn,
        analytic_grad: Option<GradFn>,
        support_radius: Option<f64>,
    ) -> Self {
        TestFunction {
            id,
            domain,
            eval,
            analytic_grad,
            support_radius,
        }
    }

    pub(crate) fn expect_domain(&self, domain: Domain) -> Result<()> {
        if self.domain == domain {
            Ok(())
        } else {
            Err(Error::KindMismatch(format!(
                "test function `{}` lives on {:?}, not {:?}",
                self.id, self.domain, domain
            )))
        }
    }
}
