use super::{Matrix, Real};

/// Callback receiving `(name, dims, values)` for each tensor.
pub type Visitor<'a, T> = dyn FnMut(&str, &[usize], &[T]) + 'a;
/// Callback receiving `(name, values)` for in-place updates.
pub type VisitorMut<'a, T> = dyn FnMut(&str, &mut [T]) + 'a;

/// Named traversal over learnable tensors.
///
/// The visit order is fixed per type; optimizers, checkpoints and gradient
/// buffers all rely on it to pair parameters with their state.
pub trait Params<T: Real> {
    fn visit(&self, prefix: &str, f: &mut Visitor<'_, T>);
    fn visit_mut(&mut self, prefix: &str, f: &mut VisitorMut<'_, T>);

    /// Non-learnable state that still has to be persisted (running statistics).
    fn visit_buffers(&self, _prefix: &str, _f: &mut Visitor<'_, T>) {}

    fn visit_buffers_mut(&mut self, _prefix: &str, _f: &mut VisitorMut<'_, T>) {}
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

pub(crate) fn visit_matrix<T: Real>(m: &Matrix<T>, name: String, f: &mut Visitor<'_, T>) {
    f(&name, &[m.rows(), m.cols()], m.as_slice());
}

pub(crate) fn visit_vec<T: Real>(v: &[T], name: String, f: &mut Visitor<'_, T>) {
    f(&name, &[v.len()], v);
}

/// Total number of scalar parameters.
pub fn count_params<T: Real, P: Params<T> + ?Sized>(p: &P) -> usize {
    let mut n = 0;
    p.visit("", &mut |_, _, data| n += data.len());
    n
}

/// A copy of `p` with every parameter set to zero; doubles as a gradient buffer.
pub fn zeros_like<T: Real, P: Params<T> + Clone>(p: &P) -> P {
    let mut z = p.clone();
    z.visit_mut("", &mut |_, data| data.fill(T::zero()));
    z
}

/// Concatenation of all parameters in visit order.
pub fn flatten<T: Real, P: Params<T> + ?Sized>(p: &P) -> Vec<T> {
    let mut out = Vec::new();
    p.visit("", &mut |_, _, data| out.extend_from_slice(data));
    out
}

/// `dst += src` across every parameter; both must share a layout.
pub fn accumulate<T: Real, P: Params<T>>(dst: &mut P, src: &P) {
    let flat = flatten(src);
    let mut offset = 0;
    dst.visit_mut("", &mut |_, data| {
        for (d, &s) in data.iter_mut().zip(&flat[offset..]) {
            *d += s;
        }
        offset += data.len();
    });
}

pub fn scale_all<T: Real, P: Params<T>>(p: &mut P, k: T) {
    p.visit_mut("", &mut |_, data| data.iter_mut().for_each(|v| *v *= k));
}
