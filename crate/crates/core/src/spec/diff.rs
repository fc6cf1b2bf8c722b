use std::collections::HashSet;

use serde::Serialize;
use serde_json::Value;

use super::{ComponentSpec, SectionLayout, SectionSpec, SpecDocument, SpecPath};
use crate::edit::EditInstruction;

/// Computes an edit script turning `before` into `after`.
///
/// Scalars are replaced individually; text lists and the palette are replaced
/// wholesale; sections and components are matched by id, with the longest
/// order-preserving run of shared ids kept in place and everything else
/// removed or inserted. The script is ordered removals, then replacements,
/// then insertions, so no intermediate state ever holds a duplicate id.
pub fn spec_diff(before: &SpecDocument, after: &SpecDocument) -> Vec<EditInstruction> {
    let mut script = Script::default();
    let root = SpecPath::root();

    script.scalar(
        root.clone().field("page_goal"),
        &before.page_goal,
        &after.page_goal,
    );

    let (bg, ag) = (&before.global, &after.global);
    let layout = root.clone().field("global").field("layout");
    script.scalar(
        layout.clone().field("grid_columns"),
        &bg.layout.grid_columns,
        &ag.layout.grid_columns,
    );
    script.scalar(
        layout.clone().field("spacing_px"),
        &bg.layout.spacing_px,
        &ag.layout.spacing_px,
    );
    script.scalar(
        layout.field("semantic"),
        &bg.layout.semantic,
        &ag.layout.semantic,
    );
    script.scalar(
        root.clone().field("global").field("colors"),
        &bg.colors,
        &ag.colors,
    );
    let shape = root.clone().field("global").field("shape");
    script.scalar(
        shape.clone().field("corner_radius_px"),
        &bg.shape.corner_radius_px,
        &ag.shape.corner_radius_px,
    );
    script.scalar(
        shape.field("semantic"),
        &bg.shape.semantic,
        &ag.shape.semantic,
    );
    script.scalar(
        root.clone().field("global").field("scenario"),
        &bg.scenario,
        &ag.scenario,
    );

    script.keyed_list(
        root.field("sections"),
        &before.sections,
        &after.sections,
        |s| s.id.as_str(),
        diff_section,
    );

    script.finish()
}

fn diff_section(script: &mut Script, base: SpecPath, before: &SectionSpec, after: &SectionSpec) {
    let pos = base.clone().field("pos");
    script.scalar(
        pos.clone().field("anchor"),
        &before.pos.anchor,
        &after.pos.anchor,
    );
    script.scalar(
        pos.field("fraction"),
        &before.pos.fraction,
        &after.pos.fraction,
    );
    diff_layout(
        script,
        base.clone().field("layout"),
        &before.layout,
        &after.layout,
    );
    script.scalar(base.clone().field("colors"), &before.colors, &after.colors);
    script.keyed_list(
        base.field("components"),
        &before.components,
        &after.components,
        |c| c.id.as_str(),
        diff_component,
    );
}

fn diff_component(
    script: &mut Script,
    base: SpecPath,
    before: &ComponentSpec,
    after: &ComponentSpec,
) {
    script.scalar(base.clone().field("type"), &before.kind, &after.kind);
    script.scalar(base.clone().field("func"), &before.func, &after.func);
    diff_layout(
        script,
        base.clone().field("layout"),
        &before.layout,
        &after.layout,
    );
    script.scalar(base.field("colors"), &before.colors, &after.colors);
}

fn diff_layout(script: &mut Script, base: SpecPath, before: &SectionLayout, after: &SectionLayout) {
    script.scalar(
        base.clone().field("grid_rows"),
        &before.grid_rows,
        &after.grid_rows,
    );
    script.scalar(
        base.clone().field("grid_cols"),
        &before.grid_cols,
        &after.grid_cols,
    );
    script.scalar(
        base.field("spacing_px"),
        &before.spacing_px,
        &after.spacing_px,
    );
}

#[derive(Default)]
struct Script {
    removes: Vec<EditInstruction>,
    replaces: Vec<EditInstruction>,
    inserts: Vec<EditInstruction>,
}

impl Script {
    fn scalar<T: PartialEq + Serialize>(&mut self, path: SpecPath, before: &T, after: &T) {
        if before != after {
            self.replaces
                .push(EditInstruction::replace(path, to_value(after)));
        }
    }

    fn keyed_list<T, K, F>(&mut self, base: SpecPath, before: &[T], after: &[T], key: K, recurse: F)
    where
        T: Serialize,
        K: Fn(&T) -> &str,
        F: Fn(&mut Script, SpecPath, &T, &T),
    {
        let before_ids: HashSet<&str> = before.iter().map(&key).collect();
        let after_ids: HashSet<&str> = after.iter().map(&key).collect();
        let shared_before: Vec<&str> = before
            .iter()
            .map(&key)
            .filter(|id| after_ids.contains(id))
            .collect();
        let shared_after: Vec<&str> = after
            .iter()
            .map(&key)
            .filter(|id| before_ids.contains(id))
            .collect();
        let kept: HashSet<&str> = longest_common_subsequence(&shared_before, &shared_after)
            .into_iter()
            .collect();

        for item in before {
            let id = key(item);
            if !kept.contains(id) {
                self.removes
                    .push(EditInstruction::remove(base.clone().id(id)));
            }
        }
        for (i, item) in after.iter().enumerate() {
            let id = key(item);
            if kept.contains(id) {
                let old = before
                    .iter()
                    .find(|b| key(b) == id)
                    .expect("kept ids exist in before");
                recurse(self, base.clone().id(id), old, item);
            } else {
                self.inserts.push(EditInstruction::insert(
                    base.clone().index(i),
                    to_value(item),
                ));
            }
        }
    }

    fn finish(self) -> Vec<EditInstruction> {
        let mut all = self.removes;
        all.extend(self.replaces);
        all.extend(self.inserts);
        all
    }
}

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("spec values always serialize")
}

fn longest_common_subsequence<'a>(a: &[&'a str], b: &[&'a str]) -> Vec<&'a str> {
    let (n, m) = (a.len(), b.len());
    let mut table = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            table[i][j] = if a[i] == b[j] {
                table[i + 1][j + 1] + 1
            } else {
                table[i + 1][j].max(table[i][j + 1])
            };
        }
    }
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(table[0][0]);
    while i < n && j < m {
        if a[i] == b[j] {
            out.push(a[i]);
            i += 1;
            j += 1;
        } else if table[i + 1][j] >= table[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}
