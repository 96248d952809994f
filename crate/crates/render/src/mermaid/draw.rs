//! Layout and rasterisation of parsed diagrams.

use std::collections::BTreeMap;

use super::parse::{ClassDiagram, Diagram, Direction, EdgeStyle, Flowchart, SeqItem, Sequence, Shape};
use crate::canvas::{text_width, Canvas, Rgb, GLYPH};

const SCALE: u32 = 2;
const LINE_H: i64 = (GLYPH * SCALE) as i64 + 4;
const PAD: i64 = 12;
const MARGIN: i64 = 24;
const GAP: i64 = 48;

const BG: Rgb = [255, 255, 255];
const INK: Rgb = [33, 33, 33];
const FILL: Rgb = [236, 236, 255];
const BORDER: Rgb = [147, 112, 219];
const MUTED: Rgb = [120, 120, 120];
const GROUP: Rgb = [255, 255, 222];

pub fn draw(diagram: &Diagram) -> Canvas {
    match diagram {
        Diagram::Flowchart(f) => draw_flowchart(f),
        Diagram::Sequence(s) => draw_sequence(s),
        Diagram::Class(c) => draw_class(c),
    }
}

fn text_block(s: &str) -> (i64, i64) {
    let lines: Vec<&str> = s.split('\n').collect();
    let w = lines.iter().map(|l| text_width(l, SCALE)).max().unwrap_or(0) as i64;
    (w, lines.len() as i64 * LINE_H)
}

fn centered_text(c: &mut Canvas, cx: i64, cy: i64, s: &str, color: Rgb) {
    let (_, h) = text_block(s);
    let mut y = cy - h / 2 + 2;
    for line in s.split('\n') {
        let w = text_width(line, SCALE) as i64;
        c.text(cx - w / 2, y, line, SCALE, color);
        y += LINE_H;
    }
}

#[derive(Clone, Copy)]
struct Rect {
    x: i64,
    y: i64,
    w: i64,
    h: i64,
}

impl Rect {
    fn cx(&self) -> i64 {
        self.x + self.w / 2
    }
    fn cy(&self) -> i64 {
        self.y + self.h / 2
    }

    /// Point where the segment from the centre towards (tx, ty) leaves the box.
    fn border_towards(&self, tx: i64, ty: i64) -> (i64, i64) {
        let (cx, cy) = (self.cx() as f64, self.cy() as f64);
        let (dx, dy) = (tx as f64 - cx, ty as f64 - cy);
        if dx == 0.0 && dy == 0.0 {
            return (self.cx(), self.cy());
        }
        let sx = if dx != 0.0 { (self.w as f64 / 2.0) / dx.abs() } else { f64::INFINITY };
        let sy = if dy != 0.0 { (self.h as f64 / 2.0) / dy.abs() } else { f64::INFINITY };
        let s = sx.min(sy);
        ((cx + dx * s).round() as i64, (cy + dy * s).round() as i64)
    }
}

/// Longest-path ranks over the graph with back edges (found by DFS in
/// declaration order) removed.
fn ranks(f: &Flowchart) -> Vec<usize> {
    let n = f.nodes.len();
    let index: BTreeMap<&str, usize> = f.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    let mut adj = vec![Vec::new(); n];
    for e in &f.edges {
        adj[index[e.from.as_str()]].push(index[e.to.as_str()]);
    }
    let mut state = vec![0u8; n];
    let mut forward = vec![Vec::new(); n];
    for root in 0..n {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < adj[v].len() {
                let w = adj[v][*next];
                *next += 1;
                match state[w] {
                    0 => {
                        forward[v].push(w);
                        state[w] = 1;
                        stack.push((w, 0));
                    }
                    2 => forward[v].push(w),
                    _ => {}
                }
            } else {
                state[v] = 2;
                stack.pop();
            }
        }
    }
    // Kahn order over forward edges.
    let mut indeg = vec![0usize; n];
    for outs in &forward {
        for &w in outs {
            indeg[w] += 1;
        }
    }
    let mut rank = vec![0usize; n];
    let mut queue: std::collections::VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    while let Some(v) = queue.pop_front() {
        for &w in &forward[v] {
            rank[w] = rank[w].max(rank[v] + 1);
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push_back(w);
            }
        }
    }
    rank
}

fn node_size(label: &str, shape: Shape) -> (i64, i64) {
    let (tw, th) = text_block(label);
    let (mut w, mut h) = (tw + 2 * PAD, th + 2 * PAD);
    match shape {
        Shape::Rhombus => {
            w = w * 3 / 2 + PAD;
            h = h * 3 / 2 + PAD;
        }
        Shape::Circle | Shape::DoubleCircle => {
            let d = w.max(h) + PAD;
            w = d;
            h = d;
        }
        Shape::Hexagon | Shape::Parallelogram | Shape::Trapezoid | Shape::Stadium | Shape::Asymmetric => w += 2 * PAD,
        _ => {}
    }
    (w, h)
}

fn draw_node(c: &mut Canvas, r: Rect, shape: Shape, label: &str) {
    let (x, y, w, h) = (r.x, r.y, r.w, r.h);
    let (x1, y1) = (x + w - 1, y + h - 1);
    let (cx, cy) = (r.cx(), r.cy());
    match shape {
        Shape::Rect | Shape::Round | Shape::Subroutine | Shape::Stadium | Shape::Cylinder => {
            c.fill_rect(x, y, w, h, FILL);
            c.stroke_rect(x, y, w, h, BORDER);
            match shape {
                Shape::Subroutine => {
                    c.line(x + 6, y, x + 6, y1, BORDER);
                    c.line(x1 - 6, y, x1 - 6, y1, BORDER);
                }
                Shape::Cylinder => {
                    c.stroke_ellipse(cx, y + 6, w / 2 - 1, 6, BORDER);
                }
                Shape::Stadium | Shape::Round => {
                    let k = if shape == Shape::Stadium { h / 2 } else { 6 };
                    for (ax, ay, sx, sy) in [(x, y, 1, 1), (x1, y, -1, 1), (x, y1, 1, -1), (x1, y1, -1, -1)] {
                        c.fill_rect(ax.min(ax + sx * k), ay.min(ay + sy * k), k, k, BG);
                        c.stroke_ellipse(ax + sx * k, ay + sy * k, k, k, BORDER);
                    }
                    c.fill_rect(x + k, y + 1, w - 2 * k, h - 2, FILL);
                    c.fill_rect(x + 1, y + k, w - 2, h - 2 * k, FILL);
                    c.line(x + k, y, x1 - k, y, BORDER);
                    c.line(x + k, y1, x1 - k, y1, BORDER);
                    c.line(x, y + k, x, y1 - k, BORDER);
                    c.line(x1, y + k, x1, y1 - k, BORDER);
                }
                _ => {}
            }
        }
        Shape::Circle | Shape::DoubleCircle => {
            c.stroke_ellipse(cx, cy, w / 2, h / 2, BORDER);
            if shape == Shape::DoubleCircle {
                c.stroke_ellipse(cx, cy, w / 2 - 4, h / 2 - 4, BORDER);
            }
        }
        Shape::Rhombus => c.stroke_polygon(&[(cx, y), (x1, cy), (cx, y1), (x, cy)], BORDER),
        Shape::Hexagon => {
            let k = PAD * 2;
            c.stroke_polygon(&[(x + k, y), (x1 - k, y), (x1, cy), (x1 - k, y1), (x + k, y1), (x, cy)], BORDER)
        }
        Shape::Parallelogram => {
            let k = PAD * 2;
            c.stroke_polygon(&[(x + k, y), (x1, y), (x1 - k, y1), (x, y1)], BORDER)
        }
        Shape::Trapezoid => {
            let k = PAD * 2;
            c.stroke_polygon(&[(x + k, y), (x1 - k, y), (x1, y1), (x, y1)], BORDER)
        }
        Shape::Asymmetric => {
            let k = PAD * 2;
            c.stroke_polygon(&[(x, y), (x1, y), (x1, y1), (x, y1), (x + k, cy)], BORDER)
        }
    }
    centered_text(c, cx, cy, label, INK);
}

fn draw_edge(c: &mut Canvas, a: (i64, i64), b: (i64, i64), style: EdgeStyle, arrow: bool) {
    match style {
        EdgeStyle::Invisible => return,
        EdgeStyle::Solid => c.line(a.0, a.1, b.0, b.1, INK),
        EdgeStyle::Dotted => c.dashed_line(a.0, a.1, b.0, b.1, INK),
        EdgeStyle::Thick => c.thick_line(a.0, a.1, b.0, b.1, 3, INK),
    }
    if arrow {
        c.arrow_head(a.0, a.1, b.0, b.1, 10.0, INK);
    }
}

fn label_box(c: &mut Canvas, cx: i64, cy: i64, s: &str) {
    let (w, h) = text_block(s);
    c.fill_rect(cx - w / 2 - 2, cy - h / 2, w + 4, h, BG);
    centered_text(c, cx, cy, s, MUTED);
}

fn draw_flowchart(f: &Flowchart) -> Canvas {
    let rank = ranks(f);
    let layers = rank.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_layer: Vec<Vec<usize>> = vec![Vec::new(); layers];
    for (i, &r) in rank.iter().enumerate() {
        by_layer[r].push(i);
    }
    let sizes: Vec<(i64, i64)> = f.nodes.iter().map(|n| node_size(&n.label, n.shape)).collect();
    let horizontal = matches!(f.direction, Direction::LeftRight | Direction::RightLeft);
    let label_room = f
        .edges
        .iter()
        .filter_map(|e| e.label.as_deref())
        .map(|l| if horizontal { text_block(l).0 } else { text_block(l).1 })
        .max()
        .unwrap_or(0);
    let layer_gap = GAP + label_room;
    // Main axis extent per layer and cross-axis extent per layer.
    let main: Vec<i64> = by_layer
        .iter()
        .map(|l| l.iter().map(|&i| if horizontal { sizes[i].0 } else { sizes[i].1 }).max().unwrap_or(0))
        .collect();
    let cross: Vec<i64> = by_layer
        .iter()
        .map(|l| {
            l.iter().map(|&i| if horizontal { sizes[i].1 } else { sizes[i].0 }).sum::<i64>()
                + GAP * (l.len() as i64 - 1).max(0)
        })
        .collect();
    let total_cross = cross.iter().copied().max().unwrap_or(0);
    let total_main = main.iter().sum::<i64>() + layer_gap * (layers as i64 - 1).max(0);
    let mut rects = vec![Rect { x: 0, y: 0, w: 0, h: 0 }; f.nodes.len()];
    let mut m = 0;
    for (li, layer) in by_layer.iter().enumerate() {
        let mut k = (total_cross - cross[li]) / 2;
        for &i in layer {
            let (w, h) = sizes[i];
            let (node_main, node_cross) = if horizontal { (w, h) } else { (h, w) };
            let main_pos = m + (main[li] - node_main) / 2;
            let (mx, my) = if horizontal { (main_pos, k) } else { (k, main_pos) };
            rects[i] = Rect {
                x: MARGIN * 2 + mx,
                y: MARGIN * 2 + my,
                w,
                h,
            };
            k += node_cross + GAP;
        }
        m += main[li] + layer_gap;
    }
    let (cw, ch) = if horizontal { (total_main, total_cross) } else { (total_cross, total_main) };
    let width = cw + 4 * MARGIN;
    let height = ch + 4 * MARGIN;
    for r in &mut rects {
        match f.direction {
            Direction::BottomUp => r.y = height - r.y - r.h,
            Direction::RightLeft => r.x = width - r.x - r.w,
            _ => {}
        }
    }
    let index: BTreeMap<&str, usize> = f.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    let mut c = Canvas::new(width as u32, height as u32, BG);
    for sg in &f.subgraphs {
        let members: Vec<Rect> = sg.members.iter().filter_map(|m| index.get(m.as_str())).map(|&i| rects[i]).collect();
        if members.is_empty() {
            continue;
        }
        let x0 = members.iter().map(|r| r.x).min().unwrap() - PAD;
        let y0 = members.iter().map(|r| r.y).min().unwrap() - PAD - LINE_H;
        let x1 = members.iter().map(|r| r.x + r.w).max().unwrap() + PAD;
        let y1 = members.iter().map(|r| r.y + r.h).max().unwrap() + PAD;
        c.fill_rect(x0, y0, x1 - x0, y1 - y0, GROUP);
        c.stroke_rect(x0, y0, x1 - x0, y1 - y0, MUTED);
        c.text(x0 + 4, y0 + 2, &sg.title, SCALE, INK);
    }
    for (i, n) in f.nodes.iter().enumerate() {
        draw_node(&mut c, rects[i], n.shape, &n.label);
    }
    for e in &f.edges {
        let (a, b) = (rects[index[e.from.as_str()]], rects[index[e.to.as_str()]]);
        if e.from == e.to {
            let (x, y) = (a.x + a.w, a.cy());
            c.line(x, y - 6, x + 16, y - 6, INK);
            c.line(x + 16, y - 6, x + 16, y + 6, INK);
            c.line(x + 16, y + 6, x, y + 6, INK);
            if e.arrow {
                c.arrow_head(x + 16, y + 6, x, y + 6, 8.0, INK);
            }
            continue;
        }
        let p = a.border_towards(b.cx(), b.cy());
        let q = b.border_towards(a.cx(), a.cy());
        draw_edge(&mut c, p, q, e.style, e.arrow);
        if let Some(label) = &e.label {
            label_box(&mut c, (p.0 + q.0) / 2, (p.1 + q.1) / 2, label);
        }
    }
    c
}

fn draw_sequence(s: &Sequence) -> Canvas {
    let head_w: Vec<i64> = s.participants.iter().map(|p| text_block(&p.label).0 + 2 * PAD).collect();
    let widest_msg = s
        .items
        .iter()
        .map(|it| match it {
            SeqItem::Message { text, .. } | SeqItem::Note { text, .. } => text_block(text).0,
            SeqItem::Block { kind, label } => text_width(&format!("[{kind}] {label}"), SCALE) as i64,
        })
        .max()
        .unwrap_or(0);
    let col_w = head_w.iter().copied().max().unwrap_or(0).max(widest_msg / 2 + PAD * 2) + GAP;
    let head_h = LINE_H + 2 * PAD;
    let xs: Vec<i64> = (0..s.participants.len()).map(|i| MARGIN + col_w / 2 + i as i64 * col_w).collect();
    let col: BTreeMap<&str, usize> = s.participants.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
    let rows: Vec<i64> = s
        .items
        .iter()
        .map(|it| match it {
            SeqItem::Message { text, .. } => text_block(text).1 + 2 * PAD,
            SeqItem::Note { text, .. } => text_block(text).1 + 3 * PAD,
            SeqItem::Block { .. } => LINE_H + PAD,
        })
        .collect();
    let body_h: i64 = rows.iter().sum();
    let width = (MARGIN * 2 + col_w * s.participants.len() as i64).max(widest_msg + 2 * MARGIN);
    let height = MARGIN * 2 + head_h * 2 + body_h + 2 * PAD;
    let mut c = Canvas::new(width as u32, height as u32, BG);
    let top = MARGIN;
    let bottom = height - MARGIN - head_h;
    for (i, p) in s.participants.iter().enumerate() {
        let x = xs[i];
        c.dashed_line(x, top + head_h, x, bottom, MUTED);
        for y in [top, bottom] {
            let r = Rect {
                x: x - head_w[i] / 2,
                y,
                w: head_w[i],
                h: head_h,
            };
            draw_node(&mut c, r, Shape::Rect, &p.label);
        }
    }
    let mut y = top + head_h + PAD;
    for (it, h) in s.items.iter().zip(&rows) {
        match it {
            SeqItem::Message { from, to, text, dashed } => {
                let (a, b) = (xs[col[from.as_str()]], xs[col[to.as_str()]]);
                let ly = y + h - PAD / 2;
                centered_text(&mut c, (a + b) / 2 + if a == b { col_w / 4 } else { 0 }, ly - text_block(text).1 / 2 - 4, text, INK);
                if a == b {
                    c.line(a, ly - 8, a + 24, ly - 8, INK);
                    c.line(a + 24, ly - 8, a + 24, ly, INK);
                    c.line(a + 24, ly, a, ly, INK);
                    c.arrow_head(a + 24, ly, a, ly, 8.0, INK);
                } else {
                    if *dashed {
                        c.dashed_line(a, ly, b, ly, INK);
                    } else {
                        c.line(a, ly, b, ly, INK);
                    }
                    c.arrow_head(a, ly, b, ly, 10.0, INK);
                }
            }
            SeqItem::Note { over, text } => {
                let cols: Vec<i64> = over.iter().map(|p| xs[col[p.as_str()]]).collect();
                let (tw, th) = text_block(text);
                let lo = *cols.iter().min().unwrap();
                let hi = *cols.iter().max().unwrap();
                let w = (hi - lo + col_w / 2).max(tw + 2 * PAD);
                let cx = (lo + hi) / 2;
                c.fill_rect(cx - w / 2, y + PAD / 2, w, th + 2 * PAD, GROUP);
                c.stroke_rect(cx - w / 2, y + PAD / 2, w, th + 2 * PAD, MUTED);
                centered_text(&mut c, cx, y + PAD / 2 + PAD + th / 2, text, INK);
            }
            SeqItem::Block { kind, label } => {
                c.dashed_line(MARGIN / 2, y + 2, width - MARGIN / 2, y + 2, BORDER);
                c.text(MARGIN / 2 + 4, y + 6, &format!("[{kind}] {label}"), SCALE, BORDER);
            }
        }
        y += h;
    }
    c
}

fn draw_class(d: &ClassDiagram) -> Canvas {
    let n = d.classes.len();
    let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
    let boxes: Vec<(i64, i64)> = d
        .classes
        .iter()
        .map(|k| {
            let mut lines = vec![k.name.replace('~', "")];
            if let Some(a) = &k.annotation {
                lines.push(format!("<<{a}>>"));
            }
            lines.extend(k.members.iter().cloned());
            let w = lines.iter().map(|l| text_width(l, SCALE) as i64).max().unwrap_or(0) + 2 * PAD;
            (w, lines.len() as i64 * LINE_H + 3 * PAD)
        })
        .collect();
    let cell_w = boxes.iter().map(|b| b.0).max().unwrap_or(0) + GAP * 2;
    let rows = n.div_ceil(cols);
    let row_h: Vec<i64> = (0..rows).map(|r| boxes[r * cols..((r + 1) * cols).min(n)].iter().map(|b| b.1).max().unwrap_or(0) + GAP * 2).collect();
    let width = MARGIN * 2 + cell_w * cols as i64;
    let height = MARGIN * 2 + row_h.iter().sum::<i64>();
    let mut c = Canvas::new(width as u32, height as u32, BG);
    let mut rects = Vec::with_capacity(n);
    for (i, &(w, h)) in boxes.iter().enumerate() {
        let (r, k) = (i / cols, i % cols);
        let y0 = MARGIN + row_h[..r].iter().sum::<i64>() + (row_h[r] - h) / 2;
        let x0 = MARGIN + k as i64 * cell_w + (cell_w - w) / 2;
        rects.push(Rect { x: x0, y: y0, w, h });
    }
    let index: BTreeMap<&str, usize> = d.classes.iter().enumerate().map(|(i, k)| (k.name.as_str(), i)).collect();
    for rel in &d.relations {
        let (a, b) = (rects[index[rel.from.as_str()]], rects[index[rel.to.as_str()]]);
        let p = a.border_towards(b.cx(), b.cy());
        let q = b.border_towards(a.cx(), a.cy());
        if rel.kind.contains("..") {
            c.dashed_line(p.0, p.1, q.0, q.1, INK);
        } else {
            c.line(p.0, p.1, q.0, q.1, INK);
        }
        if rel.kind.starts_with('<') || rel.kind.starts_with('*') || rel.kind.starts_with('o') {
            c.arrow_head(q.0, q.1, p.0, p.1, 10.0, INK);
        }
        if rel.kind.ends_with('>') || rel.kind.ends_with('*') || rel.kind.ends_with('o') {
            c.arrow_head(p.0, p.1, q.0, q.1, 10.0, INK);
        }
        if let Some(label) = &rel.label {
            label_box(&mut c, (p.0 + q.0) / 2, (p.1 + q.1) / 2, label);
        }
    }
    for (k, r) in d.classes.iter().zip(&rects) {
        c.fill_rect(r.x, r.y, r.w, r.h, FILL);
        c.stroke_rect(r.x, r.y, r.w, r.h, BORDER);
        let mut y = r.y + PAD / 2;
        if let Some(a) = &k.annotation {
            let s = format!("<<{a}>>");
            c.text(r.cx() - text_width(&s, SCALE) as i64 / 2, y, &s, SCALE, MUTED);
            y += LINE_H;
        }
        let name = k.name.replace('~', "");
        c.text(r.cx() - text_width(&name, SCALE) as i64 / 2, y, &name, SCALE, INK);
        y += LINE_H + PAD / 2;
        c.line(r.x, y, r.x + r.w - 1, y, BORDER);
        y += PAD / 2;
        for m in &k.members {
            c.text(r.x + PAD, y, m, SCALE, INK);
            y += LINE_H;
        }
    }
    c
}
