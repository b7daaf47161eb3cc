//! Minimal standalone SVG renderer: levels as columns of stacked
//! rectangles sized by flow, edges as cubic ribbons with thickness
//! proportional to weight, binding links routed below the diagram.
//! Output is deterministic for fixed inputs.

use std::fmt::Write;

use sankey_core::graph::Ordering;
use sankey_core::LayeredGraph64;

const MARGIN: f64 = 40.0;
const COL_WIDTH: f64 = 18.0;
const COL_GAP: f64 = 150.0;
const STACK_HEIGHT: f64 = 480.0;
const NODE_GAP: f64 = 10.0;
const BINDING_DROP: f64 = 60.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct NodeBox {
    y: f64,
    height: f64,
}

pub fn render_svg(g: &LayeredGraph64, ordering: &Ordering) -> String {
    let n = g.level_count();
    let flow = |level: usize, idx: usize| -> f64 {
        g.in_flow(level, idx).max(g.out_flow(level, idx)).max(1e-9)
    };

    let max_total: f64 = (0..n)
        .map(|i| (0..g.level_size(i)).map(|v| flow(i, v)).sum::<f64>())
        .fold(1e-9, f64::max);
    let scale = STACK_HEIGHT * 0.8 / max_total;

    // Node boxes stacked in rank order, each level vertically centered.
    let mut boxes: Vec<Vec<NodeBox>> = Vec::with_capacity(n);
    for level in 0..n {
        let size = g.level_size(level);
        let total: f64 =
            (0..size).map(|v| flow(level, v) * scale).sum::<f64>() + NODE_GAP * (size - 1) as f64;
        let mut y = MARGIN + (STACK_HEIGHT - total) / 2.0;
        let mut level_boxes: Vec<NodeBox> = (0..size).map(|_| NodeBox { y: 0.0, height: 0.0 }).collect();
        for &idx in ordering.level(level) {
            let h = flow(level, idx) * scale;
            level_boxes[idx] = NodeBox { y, height: h };
            y += h + NODE_GAP;
        }
        boxes.push(level_boxes);
    }

    let col_x = |level: usize| MARGIN + level as f64 * (COL_WIDTH + COL_GAP);
    let has_binding = g.has_binding();
    let width = MARGIN * 2.0 + n as f64 * COL_WIDTH + (n - 1) as f64 * COL_GAP;
    let height = MARGIN * 2.0 + STACK_HEIGHT + if has_binding { BINDING_DROP + 20.0 } else { 0.0 };

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.2}\" height=\"{height:.2}\" viewBox=\"0 0 {width:.2} {height:.2}\">"
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Per-edge anchor offsets on each side of each node: outgoing slots
    // ordered by target rank, incoming by source rank.
    let mut ribbons = String::new();
    for pair in 0..g.pair_count() {
        let edges = g.edges(pair).expect("pair in range");
        let (left, right) = g.pair_levels(pair);
        let left_ranks = ordering.ranks(left);
        let right_ranks = ordering.ranks(right);
        let binding_pair = pair >= g.parallel_pair_count();

        let mut out_slots: Vec<Vec<usize>> = vec![Vec::new(); g.level_size(left)];
        let mut in_slots: Vec<Vec<usize>> = vec![Vec::new(); g.level_size(right)];
        for (e_idx, e) in edges.iter().enumerate() {
            out_slots[e.src].push(e_idx);
            in_slots[e.dst].push(e_idx);
        }
        let mut src_y = vec![0.0f64; edges.len()];
        let mut dst_y = vec![0.0f64; edges.len()];
        for (v, slots) in out_slots.iter_mut().enumerate() {
            slots.sort_by_key(|&e| right_ranks[edges[e].dst]);
            let mut offset = boxes[left][v].y;
            for &e in slots.iter() {
                let thick = edges[e].weight * scale;
                src_y[e] = offset + thick / 2.0;
                offset += thick;
            }
        }
        for (v, slots) in in_slots.iter_mut().enumerate() {
            slots.sort_by_key(|&e| left_ranks[edges[e].src]);
            let mut offset = boxes[right][v].y;
            for &e in slots.iter() {
                let thick = edges[e].weight * scale;
                dst_y[e] = offset + thick / 2.0;
                offset += thick;
            }
        }

        for (e_idx, e) in edges.iter().enumerate() {
            let thick = (e.weight * scale).max(0.4);
            if binding_pair {
                // Wrap below the diagram: out of the last column, down,
                // across, and up into the first column.
                let x0 = col_x(left) + COL_WIDTH;
                let y0 = src_y[e_idx];
                let x1 = col_x(right);
                let y1 = dst_y[e_idx];
                let drop = MARGIN + STACK_HEIGHT + BINDING_DROP;
                let _ = writeln!(
                    ribbons,
                    "<path d=\"M {x0:.2} {y0:.2} C {:.2} {y0:.2} {:.2} {drop:.2} {:.2} {drop:.2} L {:.2} {drop:.2} C {:.2} {drop:.2} {:.2} {y1:.2} {x1:.2} {y1:.2}\" fill=\"none\" stroke=\"#b0703c\" stroke-opacity=\"0.45\" stroke-width=\"{thick:.2}\"/>",
                    x0 + 60.0,
                    x0 + 60.0,
                    x0 + 20.0,
                    x1 - 20.0,
                    x1 - 60.0,
                    x1 - 60.0,
                );
            } else {
                let x0 = col_x(left) + COL_WIDTH;
                let x1 = col_x(right);
                let cx = COL_GAP * 0.45;
                let _ = writeln!(
                    ribbons,
                    "<path d=\"M {x0:.2} {:.2} C {:.2} {:.2} {:.2} {:.2} {x1:.2} {:.2}\" fill=\"none\" stroke=\"#4a7ba6\" stroke-opacity=\"0.45\" stroke-width=\"{thick:.2}\"/>",
                    src_y[e_idx],
                    x0 + cx,
                    src_y[e_idx],
                    x1 - cx,
                    dst_y[e_idx],
                    dst_y[e_idx],
                );
            }
        }
    }
    out.push_str(&ribbons);

    for level in 0..n {
        let x = col_x(level);
        for idx in 0..g.level_size(level) {
            let meta = g.vertex(level, idx);
            let nb = &boxes[level][idx];
            let opacity = if meta.dummy { "0.25" } else { "1" };
            let _ = writeln!(
                out,
                "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"{COL_WIDTH:.2}\" height=\"{:.2}\" fill=\"#2f6f8f\" fill-opacity=\"{opacity}\"/>",
                nb.y,
                nb.height.max(1.0),
            );
            if !meta.dummy {
                let _ = writeln!(
                    out,
                    "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" dominant-baseline=\"middle\">{}</text>",
                    x + COL_WIDTH + 4.0,
                    nb.y + nb.height / 2.0,
                    esc(&meta.name),
                );
            }
        }
    }

    out.push_str("</svg>\n");
    out
}
