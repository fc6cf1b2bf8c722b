//! Builds a small SPEC-code exemplar store and queries it.
//!
//! ```text
//! cargo run -p uispec --example build_exemplar_store -- [out.jsonl]
//! ```
//!
//! Without an argument the store is written to a temporary file. The
//! repository's `fixtures/store/exemplars.jsonl` is produced by this example.

use std::fmt::Write as _;

use uispec::retrieval::ExemplarStore;
use uispec::spec::{
    Anchor, ColorToken, ComponentSpec, Fraction, PositionSpec, SectionLayout, SectionSpec,
    SpecDocument,
};
use uispec::validate::validate;

struct Archetype {
    goal: &'static str,
    sections: &'static [(
        &'static str,
        Anchor,
        u32,
        u32,
        &'static [(&'static str, &'static str)],
    )],
}

const ARCHETYPES: &[Archetype] = &[
    Archetype {
        goal: "analytics dashboard",
        sections: &[
            (
                "navigation",
                Anchor::Left,
                2000,
                1,
                &[("Menu", "primary navigation"), ("Avatar", "current user")],
            ),
            (
                "overview",
                Anchor::Right,
                8000,
                12,
                &[
                    ("Statistic", "daily revenue"),
                    ("Chart", "traffic trend"),
                    ("Table", "recent orders"),
                ],
            ),
        ],
    },
    Archetype {
        goal: "product landing page",
        sections: &[
            (
                "hero",
                Anchor::Top,
                4000,
                12,
                &[
                    ("Banner", "headline and tagline"),
                    ("Button", "start free trial"),
                ],
            ),
            (
                "features",
                Anchor::Center,
                4500,
                3,
                &[
                    ("Card", "feature one"),
                    ("Card", "feature two"),
                    ("Card", "feature three"),
                ],
            ),
            (
                "footer",
                Anchor::Bottom,
                1500,
                4,
                &[("Footer", "links and legal")],
            ),
        ],
    },
    Archetype {
        goal: "operations monitor",
        sections: &[
            (
                "title bar",
                Anchor::Top,
                1200,
                12,
                &[("Header", "console title"), ("SearchBar", "find a host")],
            ),
            (
                "widgets",
                Anchor::Bottom,
                8800,
                2,
                &[
                    ("Statistic", "active users"),
                    ("Chart", "error rate"),
                    ("List", "alerts"),
                ],
            ),
        ],
    },
    Archetype {
        goal: "account settings",
        sections: &[
            (
                "header",
                Anchor::Top,
                1000,
                12,
                &[("Breadcrumb", "settings path")],
            ),
            (
                "tabs",
                Anchor::Left,
                2500,
                1,
                &[("Tabs", "settings groups")],
            ),
            (
                "form",
                Anchor::Right,
                7500,
                6,
                &[
                    ("Form", "profile fields"),
                    ("Input", "email"),
                    ("Button", "save changes"),
                ],
            ),
        ],
    },
    Archetype {
        goal: "team directory",
        sections: &[
            (
                "search",
                Anchor::Top,
                1500,
                12,
                &[("SearchBar", "search people"), ("Badge", "result count")],
            ),
            (
                "people",
                Anchor::Center,
                7500,
                4,
                &[("Card", "person card"), ("Avatar", "photo")],
            ),
            (
                "pager",
                Anchor::Bottom,
                1000,
                12,
                &[("Pagination", "page through people")],
            ),
        ],
    },
    Archetype {
        goal: "support inbox",
        sections: &[
            (
                "folders",
                Anchor::Left,
                2000,
                1,
                &[("Sidebar", "folders"), ("Badge", "unread count")],
            ),
            (
                "threads",
                Anchor::Center,
                3500,
                1,
                &[("List", "conversation threads")],
            ),
            (
                "reader",
                Anchor::Right,
                4500,
                6,
                &[("Header", "thread subject"), ("Modal", "reply composer")],
            ),
        ],
    },
];

const PALETTES: &[&[(&str, &str)]] = &[
    &[
        ("#1F2A44", "Primary"),
        ("#F5F7FA", "Background"),
        ("#1A1A1A", "Text"),
        ("#3B82F6", "Accent"),
    ],
    &[
        ("#0B1020", "Background"),
        ("#00E5FF", "Primary"),
        ("#E6EDF3", "Text"),
        ("#7C4DFF", "Accent"),
    ],
    &[
        ("#CF9BDE", "Primary"),
        ("#FFF7FB", "Background"),
        ("#2D2D2D", "Text"),
        ("#FF8FAB", "Accent"),
    ],
    &[
        ("#14532D", "Primary"),
        ("#FFFFFF", "Background"),
        ("#111827", "Text"),
        ("#F59E0B", "Accent"),
    ],
];

fn exemplar(a: &Archetype, palette: &[(&str, &str)], variant: usize) -> (SpecDocument, String) {
    let mut doc = SpecDocument::empty(a.goal);
    doc.global.colors = palette
        .iter()
        .map(|(hex, role)| ColorToken::new(*hex, *role))
        .collect();
    doc.global.shape.corner_radius_px = [4, 8, 12, 16][variant];
    doc.global.shape.semantic = vec![["flat", "soft", "rounded", "pill"][variant].to_string()];
    doc.global.layout.semantic = vec![format!("{} sections", a.sections.len())];

    let mut jsx = String::from(
        "export default function Page() {\n  return (\n    <main className=\"page\">\n",
    );
    for (i, (name, anchor, fraction, cols, comps)) in a.sections.iter().enumerate() {
        let id = format!("sec-{}", i + 1);
        doc.sections.push(SectionSpec {
            id: id.clone(),
            pos: PositionSpec {
                anchor: *anchor,
                fraction: Fraction::from_units(*fraction),
            },
            layout: SectionLayout {
                grid_rows: comps.len() as u32,
                grid_cols: *cols,
                spacing_px: 8 * (1 + variant as u32 % 2),
            },
            colors: vec![palette[(i + variant) % palette.len()].1.to_string()],
            components: comps
                .iter()
                .enumerate()
                .map(|(j, (kind, func))| ComponentSpec {
                    kind: kind.to_string(),
                    id: format!("{id}-c{}", j + 1),
                    func: func.to_string(),
                    layout: SectionLayout {
                        grid_rows: 1,
                        grid_cols: 1,
                        spacing_px: 8,
                    },
                    colors: if j == 0 {
                        vec!["Accent".into()]
                    } else {
                        vec![]
                    },
                })
                .collect(),
        });
        writeln!(
            jsx,
            "      <section data-spec-id=\"{id}\" className=\"{}\">",
            name.replace(' ', "-")
        )
        .unwrap();
        for (kind, func) in comps.iter() {
            writeln!(jsx, "        <{kind} label=\"{func}\" />").unwrap();
        }
        jsx.push_str("      </section>\n");
    }
    jsx.push_str("    </main>\n  );\n}\n");
    (doc, format!("=== file: src/App.jsx ===\n{jsx}"))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = match std::env::args().nth(1) {
        Some(path) => std::path::PathBuf::from(path),
        None => std::env::temp_dir().join("uispec-exemplars.jsonl"),
    };
    if out.exists() {
        std::fs::remove_file(&out)?;
    }
    let mut store = ExemplarStore::open(&out)?;
    for (p, palette) in PALETTES.iter().enumerate() {
        for a in ARCHETYPES {
            let (doc, code) = exemplar(a, palette, p);
            let report = validate(&doc);
            assert!(report.ok, "{}: {:?}", a.goal, report.violations);
            store.add(doc, code)?;
        }
    }
    let stats = store.stats();
    println!(
        "wrote {} exemplars ({} dims) to {}",
        stats.records,
        stats.dimension,
        out.display()
    );

    let (probe, _) = exemplar(&ARCHETYPES[0], PALETTES[1], 1);
    for hit in store.query(&probe, 3)? {
        println!(
            "{:>6}  {:.4}  {}",
            hit.record_id,
            hit.similarity,
            store.get(&hit.record_id).unwrap().spec.page_goal
        );
    }
    Ok(())
}
