//! Group definition files.
//!
//! A marked group is pinned down by a TOML document:
//!
//! ```toml
//! [group]
//! name = "cusped"           # optional display name
//! field = "real"            # "real" or "complex"
//! dimension = 2
//! presentation = "free"     # "free", "free-product", or "opaque"
//! # factor_orders = [2, 0]  # free-product only; 0 marks an infinite factor
//!
//! [[generators]]
//! name = "a"
//! matrix = [1.0, 2.0, 0.0, 1.0]  # row-major, dimension² entries
//! # matrix_im = [0.0, ...]       # imaginary parts, complex field only
//!
//! [[peripherals]]
//! label = "a"
//! word = "a"
//!
//! [coset_table]             # optional, for finite-index induction
//! action = [[2, 1], [2, 1]] # action[g][i] = 1-based coset hit by generator
//!                           # g+1 from coset i+1
//! representatives = ["", "a"]
//! ```
//!
//! Words use the compact convention of [`Word::parse_compact`]: the i-th
//! lowercase letter is the i-th `[[generators]]` entry, uppercase its inverse;
//! whitespace-separated signed indices are accepted for ranks above 26.
//! Generator `name` fields are display labels only and do not affect word
//! parsing.
//!
//! Matrices are rescaled to |det| = 1 on load (see [`MarkedGroup::new`]), so a
//! file may carry any nonzero-determinant scaling of the intended generators.

use std::fs;
use std::path::Path;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{
    default_generator_names, CosetTable, GroupError, MarkedGroup, PeripheralSubgroup, Presentation,
};
use crate::scalar::Scalar;
use crate::word::Word;

#[derive(Debug, Error)]
pub enum GroupFileError {
    #[error("cannot read group file: {0}")]
    Io(#[from] std::io::Error),
    #[error("group file is not valid TOML: {0}")]
    Toml(#[from] Box<toml::de::Error>),
    #[error("group file cannot be rendered: {0}")]
    Render(#[from] toml::ser::Error),
    #[error("{0}")]
    Schema(String),
    #[error("word {word:?} does not parse: {message}")]
    BadWord { word: String, message: String },
    #[error(transparent)]
    Group(#[from] GroupError),
}

fn schema(msg: impl Into<String>) -> GroupFileError {
    GroupFileError::Schema(msg.into())
}

/// A parsed group file: the marked group over whichever field the file
/// declared, plus the optional coset table.
#[derive(Debug, Clone)]
pub struct GroupDefinition {
    pub name: Option<String>,
    pub group: LoadedGroup,
    pub coset_table: Option<CosetTable>,
}

/// Field-erased marked group.
#[derive(Debug, Clone)]
pub enum LoadedGroup {
    Real(MarkedGroup<f64>),
    Complex(MarkedGroup<Complex<f64>>),
}

impl LoadedGroup {
    pub fn field(&self) -> &'static str {
        match self {
            LoadedGroup::Real(_) => f64::FIELD_NAME,
            LoadedGroup::Complex(_) => Complex::<f64>::FIELD_NAME,
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            LoadedGroup::Real(g) => g.rank(),
            LoadedGroup::Complex(g) => g.rank(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LoadedGroup::Real(g) => g.dim(),
            LoadedGroup::Complex(g) => g.dim(),
        }
    }

    pub fn as_real(&self) -> Option<&MarkedGroup<f64>> {
        match self {
            LoadedGroup::Real(g) => Some(g),
            LoadedGroup::Complex(_) => None,
        }
    }
}

// ---------------------------------------------------------------------------
// On-disk schema.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDoc {
    group: GroupSection,
    #[serde(default)]
    generators: Vec<GeneratorSection>,
    #[serde(default)]
    peripherals: Vec<PeripheralSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coset_table: Option<CosetTableSection>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    field: String,
    dimension: usize,
    presentation: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    factor_orders: Vec<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    matrix: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    matrix_im: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PeripheralSection {
    label: String,
    word: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CosetTableSection {
    action: Vec<Vec<usize>>,
    representatives: Vec<String>,
}

// ---------------------------------------------------------------------------
// Loading.

/// Parse a group file from its text.
pub fn parse(text: &str) -> Result<GroupDefinition, GroupFileError> {
    let doc: FileDoc = toml::from_str(text).map_err(Box::new)?;
    let dim = doc.group.dimension;
    if dim == 0 {
        return Err(schema("dimension must be positive"));
    }
    let rank = doc.generators.len();
    if rank == 0 {
        return Err(schema("at least one generator is required"));
    }

    let mut names = Vec::with_capacity(rank);
    let defaults = default_generator_names(rank);
    for (i, g) in doc.generators.iter().enumerate() {
        let expect = dim * dim;
        if g.matrix.len() != expect {
            return Err(schema(format!(
                "generator {i} has {} matrix entries, expected {expect} for dimension {dim}",
                g.matrix.len()
            )));
        }
        if let Some(im) = &g.matrix_im {
            if doc.group.field != Complex::<f64>::FIELD_NAME {
                return Err(schema(format!(
                    "generator {i} has imaginary parts but the field is {:?}",
                    doc.group.field
                )));
            }
            if im.len() != expect {
                return Err(schema(format!(
                    "generator {i} has {} imaginary entries, expected {expect}",
                    im.len()
                )));
            }
        }
        let finite = g.matrix.iter().chain(g.matrix_im.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(schema(format!("generator {i} has a non-finite entry")));
        }
        names.push(g.name.clone().unwrap_or_else(|| defaults[i].clone()));
    }

    let presentation = match doc.group.presentation.as_str() {
        "free" | "opaque" => {
            if !doc.group.factor_orders.is_empty() {
                return Err(schema(format!(
                    "factor_orders is only meaningful for presentation = \"free-product\", not {:?}",
                    doc.group.presentation
                )));
            }
            if doc.group.presentation == "free" {
                Presentation::Free
            } else {
                Presentation::Opaque
            }
        }
        "free-product" => {
            if doc.group.factor_orders.len() != rank {
                return Err(schema(format!(
                    "free-product needs one factor order per generator: got {} for rank {rank}",
                    doc.group.factor_orders.len()
                )));
            }
            let orders =
                doc.group.factor_orders.iter().map(|&n| (n != 0).then_some(n)).collect();
            Presentation::FreeProduct { orders }
        }
        other => return Err(schema(format!("unknown presentation kind {other:?}"))),
    };

    let mut peripherals = Vec::with_capacity(doc.peripherals.len());
    for p in &doc.peripherals {
        let word = parse_word(&p.word, rank)?;
        if word.reduce().is_empty() {
            return Err(schema(format!("peripheral {:?} has a trivial word", p.label)));
        }
        peripherals.push(PeripheralSubgroup::new(p.label.clone(), word));
    }

    let group = match doc.group.field.as_str() {
        "real" => LoadedGroup::Real(build_group::<f64>(&doc, dim, presentation, peripherals, names)?),
        "complex" => LoadedGroup::Complex(build_group::<Complex<f64>>(
            &doc,
            dim,
            presentation,
            peripherals,
            names,
        )?),
        other => return Err(schema(format!("unknown field tag {other:?}"))),
    };

    let coset_table = match doc.coset_table {
        Some(section) => Some(parse_coset_table(&section, rank)?),
        None => None,
    };

    Ok(GroupDefinition { name: doc.group.name, group, coset_table })
}

fn parse_word(text: &str, rank: usize) -> Result<Word, GroupFileError> {
    let word = Word::parse_compact(text)
        .map_err(|message| GroupFileError::BadWord { word: text.to_string(), message })?;
    if let Some(l) = word.letters().iter().find(|l| l.unsigned_abs() as usize > rank) {
        return Err(GroupFileError::BadWord {
            word: text.to_string(),
            message: format!("letter {l} exceeds the rank {rank}"),
        });
    }
    Ok(word)
}

fn build_group<T: Scalar>(
    doc: &FileDoc,
    dim: usize,
    presentation: Presentation,
    peripherals: Vec<PeripheralSubgroup>,
    names: Vec<String>,
) -> Result<MarkedGroup<T>, GroupFileError> {
    let images = doc
        .generators
        .iter()
        .map(|g| {
            DMatrix::from_fn(dim, dim, |r, c| {
                let at = r * dim + c;
                T::from_re_im(g.matrix[at], g.matrix_im.as_ref().map_or(0.0, |im| im[at]))
            })
        })
        .collect();
    Ok(MarkedGroup::with_names(images, presentation, peripherals, names)?)
}

fn parse_coset_table(
    section: &CosetTableSection,
    rank: usize,
) -> Result<CosetTable, GroupFileError> {
    let index = section.representatives.len();
    if section.action.len() != rank {
        return Err(schema(format!(
            "coset table has {} action rows for rank {rank}",
            section.action.len()
        )));
    }
    let mut action = Vec::with_capacity(rank);
    for (g, row) in section.action.iter().enumerate() {
        let mut out = Vec::with_capacity(row.len());
        for &coset in row {
            // File is 1-based; CosetTable is 0-based internally.
            if coset == 0 || coset > index {
                return Err(schema(format!(
                    "coset table action for generator {g} names coset {coset}, \
                     expected 1..={index}"
                )));
            }
            out.push(coset - 1);
        }
        action.push(out);
    }
    let representatives = section
        .representatives
        .iter()
        .map(|w| parse_word(w, rank))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CosetTable::new(action, representatives)?)
}

/// Load a group file from disk.
pub fn load(path: impl AsRef<Path>) -> Result<GroupDefinition, GroupFileError> {
    parse(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Saving.

/// Render a marked group (and optionally a coset table) as group-file text.
pub fn render<T: Scalar>(
    group: &MarkedGroup<T>,
    name: Option<&str>,
    table: Option<&CosetTable>,
) -> Result<String, GroupFileError> {
    let complex = T::FIELD_NAME == Complex::<f64>::FIELD_NAME;
    let generators = group
        .images()
        .iter()
        .zip(group.generator_names())
        .map(|(m, name)| {
            let dim = m.nrows();
            let flat = |part: fn(T) -> f64| -> Vec<f64> {
                (0..dim).flat_map(|r| (0..dim).map(move |c| part(m[(r, c)]))).collect()
            };
            GeneratorSection {
                name: Some(name.clone()),
                matrix: flat(T::re),
                matrix_im: complex.then(|| flat(T::im)),
            }
        })
        .collect();
    let (presentation, factor_orders) = match group.presentation() {
        Presentation::Free => ("free", Vec::new()),
        Presentation::Opaque => ("opaque", Vec::new()),
        Presentation::FreeProduct { orders } => {
            ("free-product", orders.iter().map(|o| o.unwrap_or(0)).collect())
        }
    };
    let doc = FileDoc {
        group: GroupSection {
            name: name.map(str::to_string),
            field: T::FIELD_NAME.to_string(),
            dimension: group.dim(),
            presentation: presentation.to_string(),
            factor_orders,
        },
        generators,
        peripherals: group
            .peripherals()
            .iter()
            .map(|p| PeripheralSection {
                label: p.label.clone(),
                word: p.generator_word.to_compact(),
            })
            .collect(),
        coset_table: table.map(|t| CosetTableSection {
            action: t
                .action()
                .iter()
                .map(|row| row.iter().map(|&c| c + 1).collect())
                .collect(),
            representatives: t.representatives().iter().map(Word::to_compact).collect(),
        }),
    };
    Ok(toml::to_string(&doc)?)
}

/// Write a group file to disk.
pub fn save<T: Scalar>(
    group: &MarkedGroup<T>,
    name: Option<&str>,
    table: Option<&CosetTable>,
    path: impl AsRef<Path>,
) -> Result<(), GroupFileError> {
    Ok(fs::write(path, render(group, name, table)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::gallery;
    use nalgebra::dmatrix;

    fn assert_groups_equal(lhs: &MarkedGroup<f64>, rhs: &MarkedGroup<f64>) {
        assert_eq!(lhs.dim(), rhs.dim());
        assert_eq!(lhs.generator_names(), rhs.generator_names());
        assert_eq!(lhs.presentation(), rhs.presentation());
        assert_eq!(lhs.peripherals(), rhs.peripherals());
        for (a, b) in lhs.images().iter().zip(rhs.images()) {
            // Entries survive the text round trip bit-exactly: the shortest
            // float representation re-reads to the same value, and a group
            // that is already |det| = 1 is not rescaled again.
            assert_eq!(a, b, "generator images changed across a round trip");
        }
    }

    #[test]
    fn gallery_items_round_trip() {
        for item in gallery() {
            let text = render(&item.group, Some(&item.name), None).unwrap();
            let def = parse(&text).unwrap();
            assert_eq!(def.name.as_deref(), Some(item.name.as_str()));
            assert!(def.coset_table.is_none());
            let loaded = def.group.as_real().expect("gallery items are real");
            assert_groups_equal(loaded, &item.group);
        }
    }

    #[test]
    fn complex_group_round_trips() {
        let theta = std::f64::consts::FRAC_PI_3;
        let z = Complex::new(theta.cos(), theta.sin());
        let a = dmatrix![z * 2.0, Complex::new(1.0, -0.5); Complex::new(0.0, 0.0), z.conj() / 2.0];
        let group = MarkedGroup::new(
            vec![a],
            Presentation::Free,
            vec![PeripheralSubgroup::new("a", Word::new(vec![1]))],
        )
        .unwrap();
        let text = render(&group, None, None).unwrap();
        assert!(text.contains("matrix_im"));
        let def = parse(&text).unwrap();
        match def.group {
            LoadedGroup::Complex(g) => {
                assert_eq!(g.images()[0], group.images()[0]);
                assert_eq!(g.peripherals(), group.peripherals());
            }
            LoadedGroup::Real(_) => panic!("field tag lost in round trip"),
        }
    }

    #[test]
    fn coset_table_round_trips() {
        let group = MarkedGroup::<f64>::new(
            vec![dmatrix![2.0, 0.0; 0.0, 0.5], dmatrix![1.0, 1.0; 0.0, 1.0]],
            Presentation::Free,
            vec![],
        )
        .unwrap();
        let table = CosetTable::new(
            vec![vec![1, 0], vec![1, 0]],
            vec![Word::identity(), Word::new(vec![1])],
        )
        .unwrap();
        let text = render(&group, Some("swap"), Some(&table)).unwrap();
        let def = parse(&text).unwrap();
        let loaded = def.coset_table.expect("table survives the round trip");
        assert_eq!(loaded.action(), table.action());
        assert_eq!(loaded.representatives(), table.representatives());
    }

    #[test]
    fn save_and_load_hit_the_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cusped.toml");
        let item = &gallery()[0];
        save(&item.group, Some(&item.name), None, &path).unwrap();
        let def = load(&path).unwrap();
        assert_groups_equal(def.group.as_real().unwrap(), &item.group);

        let missing = load(dir.path().join("nope.toml"));
        assert!(matches!(missing, Err(GroupFileError::Io(_))));
    }

    #[test]
    fn schema_errors_are_caught() {
        let base = |body: &str| {
            format!(
                "[group]\nfield = \"real\"\ndimension = 2\npresentation = \"free\"\n{body}"
            )
        };

        let wrong_len = parse(&base("[[generators]]\nmatrix = [1.0, 0.0, 1.0]\n"));
        assert!(matches!(wrong_len, Err(GroupFileError::Schema(_))), "{wrong_len:?}");

        let bad_field = parse(
            "[group]\nfield = \"quaternion\"\ndimension = 2\npresentation = \"free\"\n\
             [[generators]]\nmatrix = [2.0, 0.0, 0.0, 0.5]\n",
        );
        assert!(matches!(bad_field, Err(GroupFileError::Schema(_))), "{bad_field:?}");

        let im_on_real = parse(&base(
            "[[generators]]\nmatrix = [2.0, 0.0, 0.0, 0.5]\nmatrix_im = [0.0, 0.0, 0.0, 0.0]\n",
        ));
        assert!(matches!(im_on_real, Err(GroupFileError::Schema(_))), "{im_on_real:?}");

        let bad_word = parse(&base(
            "[[generators]]\nmatrix = [2.0, 0.0, 0.0, 0.5]\n\
             [[peripherals]]\nlabel = \"c\"\nword = \"ab\"\n",
        ));
        assert!(matches!(bad_word, Err(GroupFileError::BadWord { .. })), "{bad_word:?}");

        let singular = parse(&base("[[generators]]\nmatrix = [1.0, 0.0, 0.0, 0.0]\n"));
        assert!(matches!(singular, Err(GroupFileError::Group(_))), "{singular:?}");

        let not_toml = parse("[group\nfield=");
        assert!(matches!(not_toml, Err(GroupFileError::Toml(_))), "{not_toml:?}");

        let orders_on_free = parse(
            "[group]\nfield = \"real\"\ndimension = 2\npresentation = \"free\"\n\
             factor_orders = [2]\n[[generators]]\nmatrix = [2.0, 0.0, 0.0, 0.5]\n",
        );
        assert!(matches!(orders_on_free, Err(GroupFileError::Schema(_))), "{orders_on_free:?}");

        let bad_coset = parse(&base(
            "[[generators]]\nmatrix = [2.0, 0.0, 0.0, 0.5]\n\
             [coset_table]\naction = [[2, 3]]\nrepresentatives = [\"\", \"a\"]\n",
        ));
        assert!(matches!(bad_coset, Err(GroupFileError::Schema(_))), "{bad_coset:?}");
    }

    #[test]
    fn free_product_orders_round_trip() {
        let group = MarkedGroup::<f64>::new(
            vec![dmatrix![0.0, 1.0; -1.0, 0.0], dmatrix![2.0, 0.0; 0.0, 0.5]],
            Presentation::FreeProduct { orders: vec![Some(4), None] },
            vec![],
        )
        .unwrap();
        let text = render(&group, None, None).unwrap();
        let def = parse(&text).unwrap();
        assert_eq!(
            def.group.as_real().unwrap().presentation(),
            &Presentation::FreeProduct { orders: vec![Some(4), None] }
        );
    }
}
