//! Static SVG scatter of an embedding.

use std::fmt::Write;

use lve_core::picker::{PickerError, Viewport};
use lve_core::reduction::Embedding2D;

const RADIUS: f64 = 4.0;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// One labelled circle per point, placed with the same viewport mapping as
/// the interactive client.
pub fn render_svg(embedding: &Embedding2D, width: u32, height: u32) -> Result<String, PickerError> {
    let view = Viewport::for_embedding(width, height, embedding)?;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(
        svg,
        r#"<text x="8" y="18" font-family="sans-serif" font-size="13">{} embedding, {} points</text>"#,
        embedding.method(),
        embedding.len()
    );
    for p in embedding.points() {
        let (px, py) = view.data_to_pixel(p.x, p.y);
        let id = escape(&p.id);
        let _ = writeln!(
            svg,
            r##"<circle cx="{px:.2}" cy="{py:.2}" r="{RADIUS}" fill="#3465a4"><title>{id}</title></circle>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="9">{id}</text>"#,
            px + RADIUS + 2.0,
            py + 3.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lve_core::reduction::{EmbeddedPoint, ReductionMethod};

    #[test]
    fn one_circle_per_point_and_escaped_ids() {
        let emb = Embedding2D::new(
            ReductionMethod::Pca,
            vec![
                EmbeddedPoint { id: "a<b".into(), x: 0.0, y: 0.0 },
                EmbeddedPoint { id: "c&d".into(), x: 1.0, y: 2.0 },
            ],
            None,
        )
        .unwrap();
        let svg = render_svg(&emb, 400, 300).unwrap();
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("a&lt;b") && svg.contains("c&amp;d"));
        assert!(!svg.contains("a<b"));
        assert!(svg.starts_with("<svg"));
    }
}
