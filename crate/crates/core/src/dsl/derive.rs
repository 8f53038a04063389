//! Symbolic differentiation. Literal zeros and ones are folded away as terms
//! are built; nothing else is simplified.

use super::{literal_value, BinOp, Func, Node};

fn num(v: f64) -> Node {
    Node::Num(v)
}

fn is_num(n: &Node, v: f64) -> bool {
    matches!(n, Node::Num(x) if *x == v)
}

fn add(l: Node, r: Node) -> Node {
    if is_num(&l, 0.0) {
        return r;
    }
    if is_num(&r, 0.0) {
        return l;
    }
    Node::Bin(BinOp::Add, Box::new(l), Box::new(r))
}

fn sub(l: Node, r: Node) -> Node {
    if is_num(&r, 0.0) {
        return l;
    }
    if is_num(&l, 0.0) {
        return neg(r);
    }
    Node::Bin(BinOp::Sub, Box::new(l), Box::new(r))
}

fn mul(l: Node, r: Node) -> Node {
    if is_num(&l, 0.0) || is_num(&r, 0.0) {
        return num(0.0);
    }
    if is_num(&l, 1.0) {
        return r;
    }
    if is_num(&r, 1.0) {
        return l;
    }
    Node::Bin(BinOp::Mul, Box::new(l), Box::new(r))
}

fn div(l: Node, r: Node) -> Node {
    if is_num(&l, 0.0) {
        return num(0.0);
    }
    if is_num(&r, 1.0) {
        return l;
    }
    Node::Bin(BinOp::Div, Box::new(l), Box::new(r))
}

fn neg(x: Node) -> Node {
    match x {
        Node::Num(v) => num(-v),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn call(f: Func, x: Node) -> Node {
    Node::Call(f, Box::new(x))
}

fn pow(base: Node, exp: Node) -> Node {
    if is_num(&exp, 1.0) {
        return base;
    }
    if is_num(&exp, 0.0) {
        return num(1.0);
    }
    Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp))
}

pub(super) fn derivative(node: &Node, slot: usize) -> Node {
    match node {
        Node::Num(_) => num(0.0),
        Node::Var(i) => num(if *i == slot { 1.0 } else { 0.0 }),
        Node::Neg(x) => neg(derivative(x, slot)),
        Node::Bin(op, l, r) => {
            let (dl, dr) = (derivative(l, slot), derivative(r, slot));
            let (l, r) = (l.as_ref().clone(), r.as_ref().clone());
            match op {
                BinOp::Add => add(dl, dr),
                BinOp::Sub => sub(dl, dr),
                BinOp::Mul => add(mul(dl, r.clone()), mul(l, dr)),
                // (l/r)' = l'/r - l r' / r^2
                BinOp::Div => sub(div(dl, r.clone()), div(mul(l, dr), pow(r, num(2.0)))),
                BinOp::Pow => match literal_value(&r) {
                    Some(c) => mul(mul(num(c), pow(l, num(c - 1.0))), dl),
                    None => {
                        // (l^r)' = l^r (r' ln l + r l' / l)
                        let whole = Node::Bin(BinOp::Pow, Box::new(l.clone()), Box::new(r.clone()));
                        let inner = add(mul(dr, call(Func::Ln, l.clone())), div(mul(r, dl), l));
                        mul(whole, inner)
                    }
                },
            }
        }
        Node::Call(f, x) => {
            let dx = derivative(x, slot);
            if is_num(&dx, 0.0) {
                return num(0.0);
            }
            let x = x.as_ref().clone();
            let outer = match f {
                Func::Sin => call(Func::Cos, x),
                Func::Cos => neg(call(Func::Sin, x)),
                Func::Exp => call(Func::Exp, x),
                Func::Ln => div(num(1.0), x),
                Func::Abs => call(Func::Sign, x),
                Func::Sqrt => div(num(0.5), call(Func::Sqrt, x)),
                // Piecewise constant; the jump at 0 is ignored.
                Func::Sign => num(0.0),
            };
            mul(outer, dx)
        }
    }
}
