//! Seeded generators and brute-force oracles shared by the property tests
//! and the acceptance run. The oracles deliberately avoid calling into the
//! code they check.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};

use image::{Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use uispec::edit::EditInstruction;
use uispec::extraction::RegionBox;
use uispec::spec::{
    Anchor, ColorToken, ComponentSpec, ComponentVocabulary, Fraction, GlobalSpecification,
    LayoutSpec, PositionSpec, SectionLayout, SectionSpec, ShapeSpec, SpecDocument, SpecPath,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const WORDS: &[&str] = &[
    "dashboard",
    "rapid browsing",
    "card-based layout",
    "naïve café",
    "quote \"q\"",
    "tab\tsep",
    "rocket 🚀",
    "back\\slash",
    "<b>bold</b>",
    "数据监控",
    "",
    "line\nbreak",
    "\u{1}ctl",
    "minimal",
    "tech",
];
pub const ROLES: &[&str] = &[
    "Primary",
    "Secondary",
    "Accent",
    "Background",
    "Surface",
    "Text",
    "Muted",
    "Warning",
];
pub const PAGE_COLS: &[u32] = &[1, 2, 3, 4, 6, 8, 12, 16, 24];
pub const SPACINGS: &[u32] = &[0, 4, 8, 12, 16, 24, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Passes `validate`.
    Valid,
    /// Satisfies the parse-time invariants, may fail validation.
    Parseable,
    /// Anything the types can hold, including duplicate ids and bad fractions.
    Wild,
}

fn word(rng: &mut ChaCha8Rng) -> String {
    WORDS.choose(rng).unwrap().to_string()
}

fn words(rng: &mut ChaCha8Rng, max: usize) -> Vec<String> {
    (0..rng.gen_range(0..=max)).map(|_| word(rng)).collect()
}

pub fn hex(rng: &mut ChaCha8Rng) -> String {
    format!("#{:06X}", rng.gen_range(0..0x100_0000u32))
}

fn anchor(rng: &mut ChaCha8Rng) -> Anchor {
    *Anchor::ALL.choose(rng).unwrap()
}

fn divisors(n: u32) -> Vec<u32> {
    (1..=n).filter(|d| n.is_multiple_of(*d)).collect()
}

pub fn random_document(rng: &mut ChaCha8Rng, max_sections: usize, mode: Mode) -> SpecDocument {
    let wild = mode == Mode::Wild;
    let roll = |rng: &mut ChaCha8Rng, p: f64| wild && rng.gen_bool(p);

    let grid_columns = if roll(rng, 0.05) {
        0
    } else {
        *PAGE_COLS.choose(rng).unwrap()
    };
    let spacing_px = *SPACINGS.choose(rng).unwrap();
    let mut roles: Vec<&str> = ROLES.to_vec();
    roles.shuffle(rng);
    let palette_len = if roll(rng, 0.15) {
        0
    } else {
        rng.gen_range(0..=5)
    };
    let colors: Vec<ColorToken> = roles[..palette_len]
        .iter()
        .map(|r| ColorToken::new(hex(rng), *r))
        .collect();
    let global = GlobalSpecification {
        layout: LayoutSpec {
            grid_columns,
            spacing_px,
            semantic: words(rng, 3),
        },
        colors: colors.clone(),
        shape: ShapeSpec {
            corner_radius_px: rng.gen_range(0..=24),
            semantic: words(rng, 2),
        },
        scenario: words(rng, 3),
    };

    let vocab: Vec<String> = ComponentVocabulary::default()
        .iter()
        .map(str::to_string)
        .collect();
    let pick_roles = |rng: &mut ChaCha8Rng| -> Vec<String> {
        let mut out = Vec::new();
        for _ in 0..rng.gen_range(0..=2) {
            if mode != Mode::Valid && rng.gen_bool(0.2) {
                out.push("Neon".to_string());
            } else if let Some(c) = colors.choose(rng) {
                out.push(c.role.clone());
            }
        }
        out
    };
    let mut used_ids: Vec<String> = Vec::new();
    let mut fresh_id = |rng: &mut ChaCha8Rng, base: String| -> String {
        let id = if wild && !used_ids.is_empty() && rng.gen_bool(0.08) {
            used_ids.choose(rng).unwrap().clone()
        } else if wild && rng.gen_bool(0.04) {
            format!("bad {base}")
        } else {
            base
        };
        used_ids.push(id.clone());
        id
    };

    let mut sections = Vec::new();
    for si in 0..rng.gen_range(0..=max_sections) {
        let sid = fresh_id(rng, format!("sec-{}", si + 1));
        let grid_cols = if mode == Mode::Valid {
            *divisors(grid_columns).choose(rng).unwrap()
        } else if roll(rng, 0.05) {
            0
        } else {
            rng.gen_range(1..=12)
        };
        let spacing = if mode == Mode::Valid {
            spacing_px * rng.gen_range(1..=3)
        } else {
            *SPACINGS.choose(rng).unwrap()
        };
        let fraction = if roll(rng, 0.1) {
            *[0u32, 10_001, 20_000].choose(rng).unwrap()
        } else {
            rng.gen_range(1..=Fraction::SCALE)
        };
        let mut components = Vec::new();
        for ci in 0..rng.gen_range(0..=4) {
            let kind = if roll(rng, 0.1) {
                "Sparkle".to_string()
            } else {
                vocab.choose(rng).unwrap().clone()
            };
            components.push(ComponentSpec {
                kind,
                id: fresh_id(rng, format!("sec-{}-c{}", si + 1, ci + 1)),
                func: word(rng),
                layout: SectionLayout {
                    grid_rows: rng.gen_range(1..=10),
                    grid_cols: rng.gen_range(1..=6),
                    spacing_px: *SPACINGS.choose(rng).unwrap(),
                },
                colors: pick_roles(rng),
            });
        }
        sections.push(SectionSpec {
            id: sid,
            pos: PositionSpec {
                anchor: anchor(rng),
                fraction: Fraction::from_units(fraction),
            },
            layout: SectionLayout {
                grid_rows: if roll(rng, 0.05) {
                    0
                } else {
                    rng.gen_range(1..=6)
                },
                grid_cols,
                spacing_px: spacing,
            },
            colors: pick_roles(rng),
            components,
        });
    }
    SpecDocument {
        page_goal: word(rng),
        global,
        sections,
    }
}

// ---------------------------------------------------------------- validator

fn addressable(id: &str) -> bool {
    !id.is_empty() && !id.contains('/') && !id.chars().any(char::is_whitespace)
}

/// Brute-force inheritance and structure checker: `(code, path)` pairs, sorted.
pub fn oracle_violations(doc: &SpecDocument, vocab: &[String]) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut push = |code: &str, path: String| out.push((code.to_string(), path));
    let g = &doc.global;
    let page_cols = g.layout.grid_columns;
    let page_spacing = g.layout.spacing_px;
    let palette: Vec<&str> = g.colors.iter().map(|c| c.role.as_str()).collect();
    let known = |role: &str| palette.contains(&role);

    if page_cols == 0 {
        push(
            "LayoutNotSpecialization",
            "/global/layout/grid_columns".into(),
        );
    }
    let mut any_refs = false;
    for s in &doc.sections {
        any_refs |= !s.colors.is_empty();
        for c in &s.components {
            any_refs |= !c.colors.is_empty();
        }
    }
    if palette.is_empty() && any_refs {
        push("EmptyPalette", "/global/colors".into());
    }

    let mut all_ids = Vec::new();
    for s in &doc.sections {
        all_ids.push(s.id.clone());
        for c in &s.components {
            all_ids.push(c.id.clone());
        }
    }
    let unique = |id: &str| all_ids.iter().filter(|x| *x == id).count() == 1;
    let mut seen: Vec<String> = Vec::new();

    for (si, s) in doc.sections.iter().enumerate() {
        let base = if addressable(&s.id) && unique(&s.id) {
            format!("/sections/#{}", s.id)
        } else {
            format!("/sections/{si}")
        };
        if seen.contains(&s.id) {
            push("DuplicateId", format!("/sections/{si}"));
        }
        seen.push(s.id.clone());
        let units = s.pos.fraction.units();
        if !(1..=10_000).contains(&units) {
            push("BadFraction", format!("{base}/pos/fraction"));
        }
        let cols = s.layout.grid_cols;
        let divides = cols >= 1 && (0..=page_cols).any(|k| k * cols == page_cols);
        if !divides {
            push(
                "LayoutNotSpecialization",
                format!("{base}/layout/grid_cols"),
            );
        }
        if s.layout.grid_rows == 0 {
            push(
                "LayoutNotSpecialization",
                format!("{base}/layout/grid_rows"),
            );
        }
        let spacing = s.layout.spacing_px;
        let multiple = if page_spacing == 0 {
            spacing == 0
        } else {
            (1..=spacing).any(|m| m * page_spacing == spacing)
        };
        if !multiple {
            push(
                "LayoutNotSpecialization",
                format!("{base}/layout/spacing_px"),
            );
        }
        for (i, role) in s.colors.iter().enumerate() {
            if !known(role) {
                push("ColorNotInPalette", format!("{base}/colors/{i}"));
            }
        }
        for (ci, c) in s.components.iter().enumerate() {
            let cbase = if addressable(&c.id) && unique(&c.id) {
                format!("{base}/components/#{}", c.id)
            } else {
                format!("{base}/components/{ci}")
            };
            if seen.contains(&c.id) {
                push("DuplicateId", format!("{base}/components/{ci}"));
            }
            seen.push(c.id.clone());
            if !vocab.contains(&c.kind) {
                push("UnknownComponentType", format!("{cbase}/type"));
            }
            for (i, role) in c.colors.iter().enumerate() {
                if !known(role) {
                    push("DanglingColorRole", format!("{cbase}/colors/{i}"));
                }
            }
        }
    }
    out.sort();
    out
}

// -------------------------------------------------------------------- edits

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Seg {
    Key(String),
    Idx(usize),
}

/// A generated edit together with the concrete location it touches.
#[derive(Debug, Clone)]
pub struct GeneratedEdit {
    pub edit: EditInstruction,
    pub concrete: Vec<Seg>,
}

fn walk(v: &Value, at: &mut Vec<Seg>, out: &mut Vec<Vec<Seg>>) {
    out.push(at.clone());
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                at.push(Seg::Key(k.clone()));
                walk(child, at, out);
                at.pop();
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                at.push(Seg::Idx(i));
                walk(child, at, out);
                at.pop();
            }
        }
        _ => {}
    }
}

pub fn all_paths(v: &Value) -> Vec<Vec<Seg>> {
    let mut out = Vec::new();
    walk(v, &mut Vec::new(), &mut out);
    out
}

pub fn get<'a>(v: &'a Value, path: &[Seg]) -> Option<&'a Value> {
    path.iter().try_fold(v, |node, seg| match seg {
        Seg::Key(k) => node.get(k.as_str()),
        Seg::Idx(i) => node.get(*i),
    })
}

pub fn get_mut<'a>(v: &'a mut Value, path: &[Seg]) -> Option<&'a mut Value> {
    path.iter().try_fold(v, |node, seg| match seg {
        Seg::Key(k) => node.get_mut(k.as_str()),
        Seg::Idx(i) => node.get_mut(*i),
    })
}

fn last_key(path: &[Seg]) -> Option<&str> {
    path.iter().rev().find_map(|s| match s {
        Seg::Key(k) => Some(k.as_str()),
        Seg::Idx(_) => None,
    })
}

/// Writes `path` as a path string, using `#id` for uniquely identified
/// sections and components about half of the time.
fn render_path(doc: &Value, path: &[Seg], rng: &mut ChaCha8Rng, append: bool) -> SpecPath {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for s in doc["sections"].as_array().unwrap() {
        *counts
            .entry(s["id"].as_str().unwrap().to_string())
            .or_default() += 1;
        for c in s["components"].as_array().unwrap() {
            *counts
                .entry(c["id"].as_str().unwrap().to_string())
                .or_default() += 1;
        }
    }
    let mut text = String::new();
    let mut node = doc;
    let mut parent_key: Option<&str> = None;
    for seg in path {
        match seg {
            Seg::Key(k) => {
                text.push('/');
                text.push_str(k);
                node = &node[k.as_str()];
                parent_key = Some(k.as_str());
            }
            Seg::Idx(i) => {
                let child = &node[*i];
                let id = child.get("id").and_then(Value::as_str);
                let by_id = matches!(parent_key, Some("sections" | "components"))
                    && id.is_some_and(|id| addressable(id) && counts.get(id) == Some(&1))
                    && rng.gen_bool(0.5);
                if by_id {
                    text.push_str(&format!("/#{}", id.unwrap()));
                } else {
                    text.push_str(&format!("/{i}"));
                }
                node = child;
                parent_key = None;
            }
        }
    }
    if append {
        text.push_str("/-");
    }
    if text.is_empty() {
        text.push('/');
    }
    text.parse().expect("generated paths parse")
}

fn leaf_value(rng: &mut ChaCha8Rng, key: Option<&str>, current: &Value, doc: &Value) -> Value {
    if rng.gen_bool(0.04) {
        // wrong shape on purpose
        return match current {
            Value::String(_) => json!(7),
            _ => json!("oops"),
        };
    }
    match (key, current) {
        (Some("hex"), _) => json!(hex(rng)),
        (Some("anchor"), _) => json!(serde_json::to_value(anchor(rng)).unwrap()),
        (Some("type"), _) => {
            let vocab: Vec<String> = ComponentVocabulary::default()
                .iter()
                .map(str::to_string)
                .collect();
            if rng.gen_bool(0.1) {
                json!("Sparkle")
            } else {
                json!(vocab.choose(rng).unwrap())
            }
        }
        (Some("id"), _) => {
            let existing: Vec<Value> = all_paths(doc)
                .into_iter()
                .filter(|p| last_key(p) == Some("id") && matches!(p.last(), Some(Seg::Key(_))))
                .filter_map(|p| get(doc, &p).cloned())
                .collect();
            if rng.gen_bool(0.1) && !existing.is_empty() {
                existing.choose(rng).unwrap().clone()
            } else {
                json!(format!("x-{}", rng.gen_range(0..1_000_000)))
            }
        }
        (Some("role"), _) => json!(format!(
            "{}-{}",
            ROLES.choose(rng).unwrap(),
            rng.gen_range(0..1000)
        )),
        (Some("fraction"), _) => {
            let units = if rng.gen_bool(0.05) {
                0
            } else {
                rng.gen_range(1..=Fraction::SCALE)
            };
            json!(f64::from(units) / 10_000.0)
        }
        (_, Value::Number(_)) => json!(rng.gen_range(0..=24u32)),
        (_, Value::String(_)) => json!(word(rng)),
        (_, other) => other.clone(),
    }
}

/// Replaces one random leaf inside `v` (or `v` itself when it is a leaf).
fn mutated(rng: &mut ChaCha8Rng, v: &Value, key: Option<&str>, doc: &Value) -> Value {
    let inner: Vec<Vec<Seg>> = all_paths(v)
        .into_iter()
        .filter(|p| matches!(get(v, p), Some(Value::String(_) | Value::Number(_))))
        .collect();
    let Some(target) = inner.choose(rng) else {
        return match v {
            Value::Array(_) => json!([]),
            other => other.clone(),
        };
    };
    let mut out = v.clone();
    let k = last_key(target).or(key);
    let current = get(&out, target).unwrap().clone();
    *get_mut(&mut out, target).unwrap() = leaf_value(rng, k, &current, doc);
    out
}

fn list_element(rng: &mut ChaCha8Rng, list_path: &[Seg], doc: &Value) -> Value {
    let key = last_key(list_path);
    let under_global = matches!(list_path.first(), Some(Seg::Key(k)) if k == "global");
    let tag = rng.gen_range(0..1_000_000);
    match key {
        Some("sections") => {
            let mut r = rng.clone();
            let mut s = random_document(&mut r, 1, Mode::Parseable);
            let sec = s.sections.pop().unwrap_or_else(|| SectionSpec {
                id: String::new(),
                pos: PositionSpec {
                    anchor: Anchor::Top,
                    fraction: Fraction::ONE,
                },
                layout: SectionLayout {
                    grid_rows: 1,
                    grid_cols: 1,
                    spacing_px: 8,
                },
                colors: vec![],
                components: vec![],
            });
            let mut v = serde_json::to_value(sec).unwrap();
            v["id"] = json!(format!("new-{tag}"));
            for (i, c) in v["components"]
                .as_array_mut()
                .unwrap()
                .iter_mut()
                .enumerate()
            {
                c["id"] = json!(format!("new-{tag}-c{i}"));
            }
            v
        }
        Some("components") => json!({
            "type": ComponentVocabulary::default().iter().next().unwrap(),
            "id": format!("new-{tag}"),
            "func": word(rng),
            "layout": {"grid_rows": rng.gen_range(1..=4), "grid_cols": rng.gen_range(1..=4), "spacing_px": 8},
            "colors": []
        }),
        Some("colors") if under_global && list_path.len() == 2 => {
            json!({"hex": hex(rng), "role": format!("Role-{tag}")})
        }
        Some("colors") => {
            let roles: Vec<Value> = doc["global"]["colors"]
                .as_array()
                .unwrap()
                .iter()
                .map(|c| c["role"].clone())
                .collect();
            roles.choose(rng).cloned().unwrap_or_else(|| json!("Neon"))
        }
        _ => json!(word(rng)),
    }
}

/// One random edit against `doc`. Most are applicable; some fail on purpose.
pub fn random_edit(rng: &mut ChaCha8Rng, doc: &SpecDocument) -> GeneratedEdit {
    let tree = serde_json::to_value(doc).unwrap();
    let paths = all_paths(&tree);
    let lists: Vec<&Vec<Seg>> = paths
        .iter()
        .filter(|p| get(&tree, p).unwrap().is_array())
        .collect();
    let elements: Vec<&Vec<Seg>> = paths
        .iter()
        .filter(|p| matches!(p.last(), Some(Seg::Idx(_))))
        .collect();

    let choice = rng.gen_range(0..4);
    if choice == 0 && !elements.is_empty() {
        let p = (*elements.choose(rng).unwrap()).clone();
        return GeneratedEdit {
            edit: EditInstruction::remove(render_path(&tree, &p, rng, false)),
            concrete: p,
        };
    }
    if choice == 1 {
        let list = (*lists.choose(rng).unwrap()).clone();
        let len = get(&tree, &list).unwrap().as_array().unwrap().len();
        let value = list_element(rng, &list, &tree);
        let (path, at) = if rng.gen_bool(0.3) {
            (render_path(&tree, &list, rng, true), len)
        } else {
            let at = rng.gen_range(0..=len);
            (render_path(&tree, &list, rng, false).index(at), at)
        };
        let mut concrete = list;
        concrete.push(Seg::Idx(at));
        return GeneratedEdit {
            edit: EditInstruction::insert(path, value),
            concrete,
        };
    }
    let p = paths[1..].choose(rng).unwrap().clone();
    let current = get(&tree, &p).unwrap();
    let value = mutated(rng, current, last_key(&p), &tree);
    GeneratedEdit {
        edit: EditInstruction::replace(render_path(&tree, &p, rng, false), value),
        concrete: p,
    }
}

/// The tree an applied edit must produce, computed on plain JSON.
pub fn expected_after(before: &Value, g: &GeneratedEdit) -> Value {
    let mut out = before.clone();
    let value = g.edit.value.clone();
    match g.edit.op {
        uispec::edit::EditOp::Replace => *get_mut(&mut out, &g.concrete).unwrap() = value.unwrap(),
        uispec::edit::EditOp::Insert | uispec::edit::EditOp::Remove => {
            let (last, parent) = g.concrete.split_last().unwrap();
            let Seg::Idx(i) = last else { unreachable!() };
            let items = get_mut(&mut out, parent).unwrap().as_array_mut().unwrap();
            match value {
                Some(v) => items.insert(*i, v),
                None => {
                    items.remove(*i);
                }
            }
        }
    }
    out
}

/// Every subtree hanging off the edit path's ancestors, other than the one
/// the path descends into, serialized. For list edits the list itself is the
/// edited node.
pub fn disjoint_subtrees(tree: &Value, g: &GeneratedEdit) -> BTreeMap<String, String> {
    let stop = match g.edit.op {
        uispec::edit::EditOp::Replace => g.concrete.len(),
        _ => g.concrete.len() - 1,
    };
    let mut out = BTreeMap::new();
    let mut node = tree;
    for (depth, seg) in g.concrete[..stop].iter().enumerate() {
        if let (Value::Object(map), Seg::Key(k)) = (node, seg) {
            for (name, child) in map {
                if name != k {
                    out.insert(
                        format!("{depth}:{name}"),
                        serde_json::to_string(child).unwrap(),
                    );
                }
            }
        }
        if let (Value::Array(items), Seg::Idx(i)) = (node, seg) {
            for (j, child) in items.iter().enumerate() {
                if j != *i {
                    out.insert(
                        format!("{depth}:[{j}]"),
                        serde_json::to_string(child).unwrap(),
                    );
                }
            }
        }
        node = match seg {
            Seg::Key(k) => &node[k.as_str()],
            Seg::Idx(i) => &node[*i],
        };
    }
    out
}

// -------------------------------------------------------------------- boxes

pub fn random_page(rng: &mut ChaCha8Rng) -> (u32, u32) {
    (rng.gen_range(16..=2000), rng.gen_range(16..=1400))
}

pub fn random_boxes(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Vec<RegionBox> {
    let n = rng.gen_range(0..=14);
    let mut out = Vec::new();
    if rng.gen_bool(0.3) {
        // a tidy card grid
        let (rows, cols) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let (cw, ch) = (w / cols, h / rows);
        for r in 0..rows {
            for c in 0..cols {
                if cw > 4 && ch > 4 && rng.gen_bool(0.8) {
                    out.push(RegionBox::new(c * cw + 2, r * ch + 2, cw - 4, ch - 4));
                }
            }
        }
    }
    for _ in 0..n {
        let x = rng.gen_range(0..w);
        let y = rng.gen_range(0..h);
        let bw = rng.gen_range(1..=(w - x).max(1) + 20);
        let bh = rng.gen_range(1..=(h - y).max(1) + 20);
        out.push(RegionBox::new(x, y, bw, bh));
    }
    out
}

/// Covered area of the union of `boxes` clipped to the page, counted on the
/// grid spanned by every box edge.
pub fn covered_area(boxes: &[RegionBox], w: u32, h: u32) -> u64 {
    let mut xs: Vec<u32> = vec![0, w];
    let mut ys: Vec<u32> = vec![0, h];
    for b in boxes {
        xs.extend([b.x.min(w), (b.x + b.w).min(w)]);
        ys.extend([b.y.min(h), (b.y + b.h).min(h)]);
    }
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();
    let mut area = 0u64;
    for xw in xs.windows(2) {
        for yw in ys.windows(2) {
            let covered = boxes
                .iter()
                .any(|b| b.x <= xw[0] && b.x + b.w >= xw[1] && b.y <= yw[0] && b.y + b.h >= yw[1]);
            if covered {
                area += u64::from(xw[1] - xw[0]) * u64::from(yw[1] - yw[0]);
            }
        }
    }
    area
}

// ------------------------------------------------------------------ metrics

pub fn random_image(rng: &mut ChaCha8Rng, w: u32, h: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |_, _| Rgb([rng.gen(), rng.gen(), rng.gen()]))
}

/// A metric fixture pair: a smooth image and a perturbed copy of it.
pub fn fixture_pair(rng: &mut ChaCha8Rng, w: u32, h: u32) -> (RgbImage, RgbImage) {
    let (fx, fy) = (rng.gen_range(1..20), rng.gen_range(1..20));
    let a = RgbImage::from_fn(w, h, |x, y| {
        Rgb([
            ((x * fx + y * 3) % 256) as u8,
            ((y * fy + x) % 256) as u8,
            ((x * y) % 256) as u8,
        ])
    });
    let style = rng.gen_range(0..3);
    let b = match style {
        0 => random_image(rng, w, h),
        1 => RgbImage::from_fn(w, h, |x, y| {
            let p = a.get_pixel(x, y);
            let n: i16 = rng.gen_range(-30..=30);
            Rgb(p.0.map(|c| (i16::from(c) + n).clamp(0, 255) as u8))
        }),
        _ => RgbImage::from_fn(w, h, |x, y| *a.get_pixel((x + 1) % w, y)),
    };
    (a, b)
}

pub fn naive_mse(a: &RgbImage, b: &RgbImage) -> f64 {
    let mut sum = 0.0;
    let mut n = 0.0;
    for (pa, pb) in a.pixels().zip(b.pixels()) {
        for c in 0..3 {
            let d = f64::from(pa[c]) - f64::from(pb[c]);
            sum += d * d;
            n += 1.0;
        }
    }
    sum / n
}

/// Direct 2-D windowed SSIM with two-pass variances.
pub fn naive_ssim(a: &RgbImage, b: &RgbImage) -> f64 {
    let (w, h) = (a.width() as usize, a.height() as usize);
    let mut k = w.min(h).min(11);
    if k % 2 == 0 {
        k -= 1;
    }
    let y = |img: &RgbImage, x: usize, yy: usize| {
        let p = img.get_pixel(x as u32, yy as u32);
        0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])
    };
    let c = (k as f64 - 1.0) / 2.0;
    let mut weights = vec![vec![0.0; k]; k];
    let mut z = 0.0;
    for (i, row) in weights.iter_mut().enumerate() {
        for (j, wt) in row.iter_mut().enumerate() {
            let d2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
            *wt = (-d2 / (2.0 * 1.5 * 1.5)).exp();
            z += *wt;
        }
    }
    let c1 = (0.01 * 255.0f64).powi(2);
    let c2 = (0.03 * 255.0f64).powi(2);
    let mut total = 0.0;
    let mut count = 0.0;
    for oy in 0..=h - k {
        for ox in 0..=w - k {
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    let wt = weights[i][j] / z;
                    ma += wt * y(a, ox + j, oy + i);
                    mb += wt * y(b, ox + j, oy + i);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    let wt = weights[i][j] / z;
                    let da = y(a, ox + j, oy + i) - ma;
                    let db = y(b, ox + j, oy + i) - mb;
                    va += wt * da * da;
                    vb += wt * db * db;
                    cov += wt * da * db;
                }
            }
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1.0;
        }
    }
    total / count
}

// ---------------------------------------------------------------- retrieval

pub fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Full argsort by descending similarity, ties by the numeric part of the id.
pub fn brute_force_top_k(
    records: &[(String, Vec<f64>)],
    q: &[f64],
    k: usize,
) -> Vec<(String, f64)> {
    let mut scored: Vec<(String, f64)> = records
        .iter()
        .map(|(id, v)| (id.clone(), naive_cosine(v, q)))
        .collect();
    let num = |id: &str| {
        id.trim_start_matches(|c: char| !c.is_ascii_digit())
            .parse::<u64>()
            .unwrap_or(u64::MAX)
    };
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(num(&a.0).cmp(&num(&b.0))));
    scored.truncate(k);
    scored
}

pub fn distinct_ids(doc: &SpecDocument) -> bool {
    let mut seen = HashSet::new();
    doc.sections.iter().all(|s| {
        seen.insert(s.id.clone()) && s.components.iter().all(|c| seen.insert(c.id.clone()))
    })
}
