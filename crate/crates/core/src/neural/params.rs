/// Something with named, flat parameter blocks visited in a fixed order.
pub trait Parameters: Clone {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64]));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64]));

    fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, b| n += b.len());
        n
    }
}

/// All blocks as (name, values).
pub fn flatten<P: Parameters>(p: &P) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    p.visit("", &mut |name, b| out.push((name.to_string(), b.to_vec())));
    out
}

pub fn zeros_like<P: Parameters>(p: &P) -> P {
    let mut z = p.clone();
    z.visit_mut("", &mut |_, b| b.iter_mut().for_each(|v| *v = 0.0));
    z
}

/// `acc += other`, block by block.
pub fn add_assign<P: Parameters>(acc: &mut P, other: &P) {
    let blocks = flatten(other);
    let mut i = 0;
    acc.visit_mut("", &mut |_, b| {
        for (a, o) in b.iter_mut().zip(&blocks[i].1) {
            *a += o;
        }
        i += 1;
    });
}

pub fn scale<P: Parameters>(p: &mut P, factor: f64) {
    p.visit_mut("", &mut |_, b| b.iter_mut().for_each(|v| *v *= factor));
}
