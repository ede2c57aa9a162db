//! Class schema and label mask data model.
//!
//! A [`LabelMask`] is the interchange unit of the whole pipeline: an H×W grid
//! of class indices produced by a segmentation network (or the argmax
//! kernel). The [`ClassSchema`] maps each class id to a name, a navigation
//! category and a render color, and flags void classes that are excluded
//! from evaluation. Masks are stored on disk as single-channel 8-bit rasters
//! (binary PGM or grayscale PNG) where the pixel value is the class id;
//! labels are categorical and are never interpolated.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Navigation category of a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    /// Safe for the vehicle to drive through.
    Traversable,
    /// The vehicle must not drive into this.
    Obstacle,
    /// Plays no role in obstacle avoidance (sky, void); planning treats it
    /// as not drivable.
    Undefined,
}

/// One entry of the class table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassDef {
    pub id: u8,
    pub name: String,
    pub category: Category,
    #[serde(rename = "void", default)]
    pub is_void: bool,
    /// RGB triple used by the renderer.
    pub color: [u8; 3],
}

/// Validated class table. Ids are unique and contiguous from 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SchemaFile", into = "SchemaFile")]
pub struct ClassSchema {
    classes: Vec<ClassDef>,
}

/// On-disk schema document: `{ "classes": [ ... ] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SchemaFile {
    classes: Vec<ClassDef>,
}

impl TryFrom<SchemaFile> for ClassSchema {
    type Error = Error;
    fn try_from(file: SchemaFile) -> Result<Self> {
        ClassSchema::new(file.classes)
    }
}

impl From<ClassSchema> for SchemaFile {
    fn from(schema: ClassSchema) -> Self {
        SchemaFile {
            classes: schema.classes,
        }
    }
}

impl ClassSchema {
    /// Validate and build a schema from class definitions.
    pub fn new(mut classes: Vec<ClassDef>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::Schema(format!(
                "need at least 2 classes, got {}",
                classes.len()
            )));
        }
        classes.sort_by_key(|c| c.id);
        for (i, class) in classes.iter().enumerate() {
            if class.id as usize != i {
                return Err(Error::Schema(format!(
                    "ids must be contiguous from 0: expected {i}, found {}",
                    class.id
                )));
            }
            if class.is_void && class.category != Category::Undefined {
                return Err(Error::Schema(format!(
                    "void class '{}' must have category undefined",
                    class.name
                )));
            }
        }
        let has = |cat| classes.iter().any(|c| c.category == cat);
        if !has(Category::Traversable) {
            return Err(Error::Schema("no traversable class".into()));
        }
        if !has(Category::Obstacle) {
            return Err(Error::Schema("no obstacle class".into()));
        }
        Ok(ClassSchema { classes })
    }

    /// Number of classes K.
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn classes(&self) -> &[ClassDef] {
        &self.classes
    }

    pub fn class(&self, id: u8) -> Option<&ClassDef> {
        self.classes.get(id as usize)
    }

    pub fn category_of(&self, label: u8) -> Category {
        self.classes[label as usize].category
    }

    pub fn is_void(&self, label: u8) -> bool {
        self.classes[label as usize].is_void
    }

    pub fn class_by_name(&self, name: &str) -> Option<&ClassDef> {
        self.classes.iter().find(|c| c.name == name)
    }

    /// Label used to fill pixels with no source data (out-of-warp regions).
    /// Unknown area must not look drivable, so prefer a void class, then any
    /// undefined-category class, then the first obstacle class.
    pub fn fill_label(&self) -> u8 {
        self.classes
            .iter()
            .find(|c| c.is_void)
            .or_else(|| {
                self.classes
                    .iter()
                    .find(|c| c.category == Category::Undefined)
            })
            .or_else(|| {
                self.classes
                    .iter()
                    .find(|c| c.category == Category::Obstacle)
            })
            .map(|c| c.id)
            .expect("schema always has an obstacle class")
    }

    /// Load a schema from a JSON document.
    pub fn load(path: impl AsRef<Path>) -> Result<ClassSchema> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("schema serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Nine-class demo schema for earthquake-site imagery: road is the only
    /// traversable class, sky is undefined and void, everything else is an
    /// obstacle.
    pub fn earthquake_demo() -> ClassSchema {
        let defs = [
            ("road", Category::Traversable, false, [84, 0, 84]),
            ("crack", Category::Obstacle, false, [255, 140, 0]),
            ("puddle", Category::Obstacle, false, [30, 110, 250]),
            ("vehicle", Category::Obstacle, false, [0, 0, 142]),
            ("human", Category::Obstacle, false, [220, 20, 60]),
            ("building", Category::Obstacle, false, [70, 70, 70]),
            ("vegetation", Category::Obstacle, false, [107, 142, 35]),
            ("debris", Category::Obstacle, false, [196, 160, 200]),
            ("sky", Category::Undefined, true, [135, 206, 235]),
        ];
        let classes = defs
            .iter()
            .enumerate()
            .map(|(id, (name, category, is_void, color))| ClassDef {
                id: id as u8,
                name: (*name).into(),
                category: *category,
                is_void: *is_void,
                color: *color,
            })
            .collect();
        ClassSchema::new(classes).expect("demo schema is valid")
    }
}

/// H×W grid of class indices, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<LabelMask> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParams(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        if labels.len() != width * height {
            return Err(Error::InvalidParams(format!(
                "label buffer has {} entries, expected {}",
                labels.len(),
                width * height
            )));
        }
        Ok(LabelMask {
            width,
            height,
            labels,
        })
    }

    /// Uniform mask filled with one label.
    pub fn filled(width: usize, height: usize, label: u8) -> LabelMask {
        LabelMask::new(width, height, vec![label; width * height]).expect("positive dims")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, label: u8) {
        self.labels[y * self.width + x] = label;
    }

    /// Check every label is a valid index for `schema`.
    pub fn validate(&self, schema: &ClassSchema) -> Result<()> {
        let k = schema.len();
        match self.labels.iter().find(|&&l| l as usize >= k) {
            Some(&label) => Err(Error::LabelOutOfRange { label, classes: k }),
            None => Ok(()),
        }
    }

    /// Load a mask from a binary PGM (P5) or 8-bit grayscale PNG file and
    /// validate its labels against the schema.
    pub fn load(path: impl AsRef<Path>, schema: &ClassSchema) -> Result<LabelMask> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mask = if bytes.starts_with(b"P5") {
            decode_pgm(&bytes)?
        } else {
            decode_png(&bytes)?
        };
        mask.validate(schema)?;
        Ok(mask)
    }

    /// Save as binary PGM (`.pgm`) or grayscale PNG (`.png`), by extension.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        match ext.as_str() {
            "png" => self.save_png(path),
            _ => self.save_pgm(path),
        }
    }

    fn save_pgm(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let header = format!("P5\n{} {}\n255\n", self.width, self.height);
        file.write_all(header.as_bytes())
            .and_then(|_| file.write_all(&self.labels))
            .map_err(|e| Error::io(path, e))
    }

    fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer(
            path,
            &self.labels,
            self.width as u32,
            self.height as u32,
            image::ColorType::L8,
        )
        .map_err(|e| Error::Parse(format!("png encode {}: {e}", path.display())))
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<LabelMask> {
    // Header: "P5" <ws> width <ws> height <ws> maxval <single ws> raster.
    // '#' starts a comment running to end of line.
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        while pos < bytes.len() {
            match bytes[pos] {
                b' ' | b'\t' | b'\r' | b'\n' => pos += 1,
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(Error::Parse("pgm: malformed header".into()));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are utf-8");
        *field = text
            .parse()
            .map_err(|_| Error::Parse("pgm: header field overflow".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Parse(format!(
            "pgm: only maxval 255 supported, got {maxval}"
        )));
    }
    pos += 1; // single whitespace byte after maxval
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| Error::Parse("pgm: dimensions overflow".into()))?;
    let raster = bytes
        .get(pos..pos + expected)
        .ok_or_else(|| Error::Parse("pgm: truncated raster".into()))?;
    LabelMask::new(width, height, raster.to_vec())
}

fn decode_png(bytes: &[u8]) -> Result<LabelMask> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Parse(format!("png decode: {e}")))?;
    match img {
        image::DynamicImage::ImageLuma8(gray) => LabelMask::new(
            gray.width() as usize,
            gray.height() as usize,
            gray.into_raw(),
        ),
        other => Err(Error::Parse(format!(
            "mask must be single-channel 8-bit, got {:?}",
            other.color()
        ))),
    }
}

/// H×W grid of navigation categories derived from a mask and its schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryMask {
    width: usize,
    height: usize,
    cells: Vec<Category>,
}

impl CategoryMask {
    pub fn new(width: usize, height: usize, cells: Vec<Category>) -> CategoryMask {
        assert_eq!(cells.len(), width * height);
        CategoryMask {
            width,
            height,
            cells,
        }
    }

    pub fn filled(width: usize, height: usize, cat: Category) -> CategoryMask {
        CategoryMask::new(width, height, vec![cat; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[Category] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Category {
        self.cells[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, cat: Category) {
        self.cells[y * self.width + x] = cat;
    }

    #[inline]
    pub fn is_traversable(&self, x: usize, y: usize) -> bool {
        self.get(x, y) == Category::Traversable
    }

    /// Cells the planner must never touch: obstacles and unknown terrain.
    #[inline]
    pub fn is_blocked(&self, x: usize, y: usize) -> bool {
        self.get(x, y) != Category::Traversable
    }
}

/// Map every label through the schema's class→category table.
pub fn to_category_mask(mask: &LabelMask, schema: &ClassSchema) -> CategoryMask {
    let cells = mask
        .labels()
        .iter()
        .map(|&l| schema.category_of(l))
        .collect();
    CategoryMask::new(mask.width(), mask.height(), cells)
}
