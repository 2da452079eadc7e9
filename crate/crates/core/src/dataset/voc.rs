use std::fmt::Write as _;

use roxmltree::{Document, Node};
use serde::Serialize;

use super::AnnotationError;
use crate::bbox::BBox;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotatedObject {
    pub label: String,
    pub bbox: BBox<f64>,
}

/// Ground truth for one image. Every box lies inside
/// `[0, image_width] x [0, image_height]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotationRecord {
    pub image_id: String,
    pub image_width: u32,
    pub image_height: u32,
    pub objects: Vec<AnnotatedObject>,
}

const IMAGE_EXTENSIONS: &[&str] = &["jpg", "jpeg", "png", "bmp", "ppm", "pgm"];

/// `name` without a trailing image extension.
fn image_stem(name: &str) -> &str {
    match name.rsplit_once('.') {
        Some((stem, ext)) if IMAGE_EXTENSIONS.iter().any(|e| e.eq_ignore_ascii_case(ext)) => stem,
        _ => name,
    }
}

fn line_of(doc: &Document, node: Node) -> u32 {
    doc.text_pos_at(node.range().start).row
}

fn invalid(doc: &Document, node: Node, message: impl Into<String>) -> AnnotationError {
    AnnotationError::Invalid {
        line: line_of(doc, node),
        message: message.into(),
    }
}

fn child<'a, 'input>(node: Node<'a, 'input>, name: &str) -> Option<Node<'a, 'input>> {
    node.children().find(|c| c.has_tag_name(name))
}

fn child_text<'a>(doc: &Document, node: Node<'a, '_>, name: &str) -> Result<&'a str, AnnotationError> {
    let c = child(node, name)
        .ok_or_else(|| invalid(doc, node, format!("missing <{name}>")))?;
    Ok(c.text().map(str::trim).unwrap_or(""))
}

fn parse_number<T: std::str::FromStr>(
    doc: &Document,
    node: Node,
    name: &str,
) -> Result<T, AnnotationError> {
    let text = child_text(doc, node, name)?;
    text.parse().map_err(|_| {
        let at = child(node, name).unwrap_or(node);
        invalid(doc, at, format!("<{name}> is not a valid number: {text:?}"))
    })
}

/// Parses a VOC-style annotation document: a root element holding `size`
/// (`width`, `height`) and zero or more `object` elements with `name` and
/// `bndbox` (`xmin`, `ymin`, `xmax`, `ymax`). The optional `filename`
/// element supplies the image id (its stem).
pub fn parse_annotation(text: &str) -> Result<AnnotationRecord, AnnotationError> {
    let doc = Document::parse(text).map_err(|e| AnnotationError::Markup {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let root = doc.root_element();

    let image_id = child(root, "filename")
        .and_then(|n| n.text())
        .map(|name| image_stem(name.trim()).to_string())
        .unwrap_or_default();

    let size = child(root, "size").ok_or_else(|| invalid(&doc, root, "missing <size>"))?;
    let image_width: u32 = parse_number(&doc, size, "width")?;
    let image_height: u32 = parse_number(&doc, size, "height")?;
    if image_width == 0 || image_height == 0 {
        return Err(invalid(&doc, size, "image size must be positive"));
    }

    let mut objects = Vec::new();
    for obj in root.children().filter(|c| c.has_tag_name("object")) {
        let label = child_text(&doc, obj, "name")?.to_string();
        if label.is_empty() {
            return Err(invalid(&doc, obj, "empty <name>"));
        }
        let bnd = child(obj, "bndbox").ok_or_else(|| invalid(&doc, obj, "missing <bndbox>"))?;
        let xmin: f64 = parse_number(&doc, bnd, "xmin")?;
        let ymin: f64 = parse_number(&doc, bnd, "ymin")?;
        let xmax: f64 = parse_number(&doc, bnd, "xmax")?;
        let ymax: f64 = parse_number(&doc, bnd, "ymax")?;
        let bbox = BBox::new(xmin, ymin, xmax, ymax)
            .map_err(|e| invalid(&doc, bnd, e.to_string()))?;
        if xmin < 0.0 || ymin < 0.0 || xmax > f64::from(image_width) || ymax > f64::from(image_height) {
            return Err(invalid(
                &doc,
                bnd,
                format!("box outside image ({xmin}, {ymin}, {xmax}, {ymax}) vs {image_width}x{image_height}"),
            ));
        }
        objects.push(AnnotatedObject { label, bbox });
    }

    Ok(AnnotationRecord {
        image_id,
        image_width,
        image_height,
        objects,
    })
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
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

/// Writes `record` in the schema accepted by [`parse_annotation`].
/// Coordinates use the shortest representation that round-trips.
pub fn serialize_annotation(record: &AnnotationRecord) -> String {
    let mut s = String::from("<annotation>\n");
    if !record.image_id.is_empty() {
        let _ = writeln!(s, "  <filename>{}</filename>", escape(&record.image_id));
    }
    let _ = writeln!(
        s,
        "  <size>\n    <width>{}</width>\n    <height>{}</height>\n  </size>",
        record.image_width, record.image_height
    );
    for obj in &record.objects {
        let b = &obj.bbox;
        let _ = writeln!(
            s,
            "  <object>\n    <name>{}</name>\n    <bndbox>\n      <xmin>{}</xmin>\n      <ymin>{}</ymin>\n      <xmax>{}</xmax>\n      <ymax>{}</ymax>\n    </bndbox>\n  </object>",
            escape(&obj.label),
            b.left(),
            b.top(),
            b.right(),
            b.bottom()
        );
    }
    s.push_str("</annotation>\n");
    s
}
