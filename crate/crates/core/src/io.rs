//! Domain-spec documents and mesh files.
//!
//! The domain-spec grammar is documented in `docs/domain-spec.md`.

use std::fmt::Write as _;
use std::path::Path;

use crate::domain::{
    ClosedForm, ConstraintDecl, DomainSpec, ExprVec, GeneratorDecl, ParamDecl, Provenance, VertexDecl,
};
use crate::error::{Error, Result};
use crate::expr::{parse_at, Expr};
use crate::mesh::{Point3, SimplicialSurface};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    PlyAscii,
    Off,
}

impl MeshFormat {
    pub fn from_name(s: &str) -> Option<MeshFormat> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" | "ply_ascii" => Some(MeshFormat::PlyAscii),
            "off" => Some(MeshFormat::Off),
            _ => None,
        }
    }

    pub fn from_path(p: &Path) -> Option<MeshFormat> {
        p.extension().and_then(|e| e.to_str()).and_then(MeshFormat::from_name)
    }
}

/// `%.17g`: 17 significant digits, trailing zeros trimmed.
pub fn g17(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let e = format!("{:.16e}", x);
    let (mant, exp) = e.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..17).contains(&exp) {
        trim(format!("{:.*}", (16 - exp) as usize, x))
    } else {
        format!(
            "{}e{}{:02}",
            trim(mant.to_string()),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

pub fn mesh_to_string(surface: &SimplicialSurface, format: MeshFormat) -> String {
    let mut s = String::new();
    let x = surface.positions();
    let t = surface.triangles();
    let v = |s: &mut String, p: &Point3| {
        let _ = writeln!(s, "{} {} {}", g17(p.x), g17(p.y), g17(p.z));
    };
    match format {
        MeshFormat::Obj => {
            for p in x {
                s.push_str("v ");
                v(&mut s, p);
            }
            for f in t {
                let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
            }
        }
        MeshFormat::PlyAscii => {
            let _ = write!(
                s,
                "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
                 element face {}\nproperty list uchar int vertex_indices\nend_header\n",
                x.len(),
                t.len()
            );
            for p in x {
                v(&mut s, p);
            }
            for f in t {
                let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
            }
        }
        MeshFormat::Off => {
            let _ = writeln!(s, "OFF\n{} {} 0", x.len(), t.len());
            for p in x {
                v(&mut s, p);
            }
            for f in t {
                let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
            }
        }
    }
    s
}

pub fn export_mesh(surface: &SimplicialSurface, format: MeshFormat, path: &Path) -> Result<()> {
    surface.validate()?;
    std::fs::write(path, mesh_to_string(surface, format))?;
    Ok(())
}

/// Reads `v` and triangular `f` lines; other lines are ignored.
pub fn import_obj(text: &str) -> Result<SimplicialSurface> {
    let mut pos = Vec::new();
    let mut tris = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let err = |msg: &str| Error::Parse {
            line: ln + 1,
            col: 1,
            msg: msg.into(),
        };
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .map(|w| w.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| err("bad coordinate"))?;
                if c.len() < 3 {
                    return Err(err("vertex needs three coordinates"));
                }
                pos.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|w| w.split('/').next().unwrap_or("").parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| err("bad face index"))?;
                if idx.len() != 3 || idx.contains(&0) {
                    return Err(err("faces must be triangles with 1-based indices"));
                }
                tris.push(([idx[0] - 1, idx[1] - 1, idx[2] - 1], ln + 1));
            }
            _ => {}
        }
    }
    if let Some((t, line)) = tris.iter().find(|(t, _)| t.iter().any(|&v| v >= pos.len())) {
        return Err(Error::Parse {
            line: *line,
            col: 1,
            msg: format!("face {:?} refers past the {} vertices", t.map(|v| v + 1), pos.len()),
        });
    }
    SimplicialSurface::new(pos, tris.into_iter().map(|(t, _)| t).collect())
}

// ---------------------------------------------------------------------------
// domain specs

struct Line<'a> {
    text: &'a str,
    no: usize,
}

impl<'a> Line<'a> {
    fn err(&self, off: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.no,
            col: off + 1,
            msg: msg.into(),
        }
    }

    fn offset(&self, part: &str) -> usize {
        part.as_ptr() as usize - self.text.as_ptr() as usize
    }

    fn expr(&self, part: &str) -> Result<Expr> {
        let lead = part.len() - part.trim_start().len();
        if part.trim().is_empty() {
            return Err(self.err(self.offset(part), "expected expression"));
        }
        parse_at(part.trim(), self.no, self.offset(part) + lead + 1)
    }

    fn index(&self, part: &str, n_vertices: Option<usize>) -> Result<usize> {
        let off = self.offset(part);
        let i: usize = part
            .parse()
            .map_err(|_| self.err(off, format!("expected vertex index, found `{part}`")))?;
        if i == 0 {
            return Err(self.err(off, "vertex indices are 1-based"));
        }
        if let Some(n) = n_vertices {
            if i > n {
                return Err(self.err(off, format!("index {i} exceeds vertex count {n}")));
            }
        }
        Ok(i - 1)
    }
}

/// Splits at `sep` outside parentheses and brackets.
fn split_top<'a>(s: &'a str, sep: char) -> Vec<&'a str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

/// Finds the whitespace-delimited keyword `kw` outside brackets.
fn find_word(s: &str, kw: &str) -> Option<usize> {
    let mut depth = 0i32;
    let b = s.as_bytes();
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            _ if depth == 0 && s[i..].starts_with(kw) => {
                let before = i == 0 || b[i - 1].is_ascii_whitespace();
                let after = i + kw.len() == s.len() || b[i + kw.len()].is_ascii_whitespace();
                if before && after {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn first_word(s: &str) -> (&str, &str) {
    let s = s.trim_start();
    match s.find(char::is_whitespace) {
        Some(i) => (&s[..i], s[i..].trim_start()),
        None => (s, ""),
    }
}

impl<'a> Line<'a> {
    /// Parses `( e, e, e )` at the start of `s`; returns it and the rest.
    fn tuple<'b>(&self, s: &'b str) -> Result<(ExprVec, &'b str)>
    where
        'a: 'b,
    {
        let s = s.trim_start();
        if !s.starts_with('(') {
            return Err(self.err(self.offset(s), "expected `(`"));
        }
        let mut depth = 0;
        let mut end = None;
        for (i, c) in s.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let end = end.ok_or_else(|| self.err(self.offset(s), "unclosed `(`"))?;
        let inner = &s[1..end];
        let parts = split_top(inner, ',');
        if parts.len() != 3 {
            return Err(self.err(self.offset(s), format!("expected 3 coordinates, found {}", parts.len())));
        }
        let v = [self.expr(parts[0])?, self.expr(parts[1])?, self.expr(parts[2])?];
        Ok((v, s[end + 1..].trim_start()))
    }

    fn keyword<'b>(&self, s: &'b str, kw: &str) -> Result<&'b str> {
        let (w, rest) = first_word(s);
        if w != kw {
            return Err(self.err(self.offset(s.trim_start()), format!("expected `{kw}`")));
        }
        Ok(rest)
    }

    fn end(&self, s: &str) -> Result<()> {
        if s.trim().is_empty() {
            Ok(())
        } else {
            Err(self.err(self.offset(s.trim_start()), format!("unexpected `{}`", s.trim())))
        }
    }

    fn bound(&self, part: &str) -> Result<Expr> {
        match part.trim() {
            "inf" => Ok(Expr::num(f64::INFINITY)),
            "-inf" => Ok(Expr::num(f64::NEG_INFINITY)),
            _ => self.expr(part),
        }
    }

    fn assignments(&self, s: &str, sep: char) -> Result<Vec<(String, Expr)>> {
        let mut out = Vec::new();
        for part in split_top(s, sep) {
            if part.trim().is_empty() {
                continue;
            }
            let (name, e) = part
                .split_once('=')
                .ok_or_else(|| self.err(self.offset(part), "expected `name = expr`"))?;
            out.push((ident(self, name)?, self.expr(e)?));
        }
        Ok(out)
    }
}

fn ident(line: &Line, s: &str) -> Result<String> {
    let t = s.trim();
    let ok = t.chars().next().map_or(false, |c| c.is_ascii_alphabetic() || c == '_')
        && t.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if !ok {
        return Err(line.err(line.offset(s), format!("bad identifier `{t}`")));
    }
    Ok(t.to_string())
}

pub fn parse_domain_spec(document: &str) -> Result<DomainSpec> {
    let mut spec = DomainSpec {
        name: String::new(),
        meta: vec![],
        parameters: vec![],
        lets: vec![],
        vertices: vec![],
        triangles: vec![],
        constraints: vec![],
        generators: vec![],
        periods: vec![],
        window: None,
        fundamental_triangles: 0,
        closed_forms: vec![],
    };
    let mut fundamental = None;
    // index checks that need the final vertex count
    let mut deferred: Vec<(usize, usize, usize)> = Vec::new();
    for (no, raw) in document.lines().enumerate() {
        let text = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let line = Line { text, no: no + 1 };
        let (kw, rest) = first_word(text);
        let nv = spec.vertices.len();
        match kw {
            "" => {}
            "name" => spec.name = ident(&line, rest)?,
            "meta" => {
                let (k, v) = first_word(rest);
                if k.is_empty() {
                    return Err(line.err(line.offset(rest), "expected meta key"));
                }
                spec.meta.push((k.to_string(), v.trim_end().to_string()));
            }
            "param" => {
                let (name, after) = rest.split_once('=').ok_or_else(|| {
                    line.err(
                        line.offset(rest),
                        "expected `param name = value in [lo, hi] fixed|free`",
                    )
                })?;
                let name = ident(&line, name)?;
                let at = find_word(after, "in").ok_or_else(|| line.err(line.offset(after), "expected `in`"))?;
                let default = line.expr(&after[..at])?;
                let range = after[at + 2..].trim_start();
                let tail = range.trim_end();
                let split = tail.rfind(char::is_whitespace).unwrap_or(0);
                let (body, mode) = (tail[..split].trim_end(), tail[split..].trim());
                let lo_open = match body.chars().next() {
                    Some('(') => true,
                    Some('[') => false,
                    _ => return Err(line.err(line.offset(range), "expected `[` or `(`")),
                };
                let hi_open = match body.chars().last() {
                    Some(')') if body.len() > 1 => true,
                    Some(']') if body.len() > 1 => false,
                    _ => return Err(line.err(line.offset(range), "expected `]` or `)` closing the range")),
                };
                let body_end = body.len();
                let inner = &body[1..body_end - 1];
                let b = split_top(inner, ',');
                if b.len() != 2 {
                    return Err(line.err(line.offset(range), "range needs `lo, hi`"));
                }
                let free = match mode {
                    "free" => true,
                    "fixed" => false,
                    _ => return Err(line.err(line.offset(range) + split, "expected `fixed` or `free`")),
                };
                spec.parameters.push(ParamDecl {
                    name,
                    default,
                    lo: line.bound(b[0])?,
                    hi: line.bound(b[1])?,
                    lo_open,
                    hi_open,
                    free,
                });
            }
            "let" => {
                let (name, e) = rest
                    .split_once('=')
                    .ok_or_else(|| line.err(line.offset(rest), "expected `let name = expr`"))?;
                spec.lets.push((ident(&line, name)?, line.expr(e)?));
            }
            "vertex" => {
                let (w, r) = first_word(rest);
                if w == "intersect" {
                    let ix: Vec<&str> = r.split_whitespace().collect();
                    if ix.len() != 4 {
                        return Err(line.err(line.offset(r), "intersect needs four vertex indices"));
                    }
                    let mut v = [0; 4];
                    for (k, s) in ix.iter().enumerate() {
                        v[k] = line.index(s, None)?;
                        deferred.push((no + 1, line.offset(s), v[k]));
                    }
                    spec.vertices.push(VertexDecl::Intersect(v));
                } else {
                    let (v, r) = line.tuple(rest)?;
                    line.end(r)?;
                    spec.vertices.push(VertexDecl::Coords(v));
                }
            }
            "triangle" => {
                let ix: Vec<&str> = rest.split_whitespace().collect();
                if ix.len() != 3 {
                    return Err(line.err(
                        line.offset(rest),
                        format!("triangle needs 3 indices, found {}", ix.len()),
                    ));
                }
                let mut t = [0; 3];
                for (k, s) in ix.iter().enumerate() {
                    t[k] = line.index(s, Some(nv))?;
                }
                spec.triangles.push(t);
            }
            "constraint" => {
                let (i, r) = first_word(rest);
                let v = line.index(i, Some(nv))?;
                let (kind, r) = first_word(r);
                let c = match kind {
                    "fixed" => {
                        line.end(r)?;
                        ConstraintDecl::Fixed
                    }
                    "free" => {
                        line.end(r)?;
                        ConstraintDecl::Free
                    }
                    "plane" => {
                        let (point, r) = line.tuple(r)?;
                        let (normal, r) = line.tuple(line.keyword(r, "normal")?)?;
                        line.end(r)?;
                        ConstraintDecl::OnPlane { point, normal }
                    }
                    "line" => {
                        let (point, r) = line.tuple(r)?;
                        let (direction, r) = line.tuple(line.keyword(r, "dir")?)?;
                        line.end(r)?;
                        ConstraintDecl::OnLine { point, direction }
                    }
                    _ => return Err(line.err(line.offset(r), format!("unknown constraint `{kind}`"))),
                };
                spec.constraints.push((v, c));
            }
            "generator" => {
                let (kind, r) = first_word(rest);
                let g = match kind {
                    "halfturn" => {
                        let ix: Vec<&str> = r.split_whitespace().collect();
                        if ix.len() != 2 {
                            return Err(line.err(line.offset(r), "halfturn needs two vertex indices"));
                        }
                        GeneratorDecl::HalfTurn(line.index(ix[0], Some(nv))?, line.index(ix[1], Some(nv))?)
                    }
                    "halfturn_line" => {
                        let (point, r) = line.tuple(r)?;
                        let (direction, r) = line.tuple(line.keyword(r, "dir")?)?;
                        line.end(r)?;
                        GeneratorDecl::HalfTurnLine { point, direction }
                    }
                    "reflect" => {
                        let (point, r) = line.tuple(r)?;
                        let (normal, r) = line.tuple(line.keyword(r, "normal")?)?;
                        line.end(r)?;
                        GeneratorDecl::Reflect { point, normal }
                    }
                    "rotate" => {
                        let (point, r) = line.tuple(r)?;
                        let (axis, r) = line.tuple(line.keyword(r, "axis")?)?;
                        let angle = line.expr(line.keyword(r, "angle")?)?;
                        GeneratorDecl::Rotate { point, axis, angle }
                    }
                    "translate" => {
                        let (v, r) = line.tuple(r)?;
                        line.end(r)?;
                        GeneratorDecl::Translate(v)
                    }
                    _ => return Err(line.err(line.offset(rest), format!("unknown generator `{kind}`"))),
                };
                spec.generators.push(g);
            }
            "period" => {
                let (v, r) = line.tuple(rest)?;
                line.end(r)?;
                spec.periods.push(v);
            }
            "window" => {
                let (lo, r) = line.tuple(rest)?;
                let (hi, r) = line.tuple(line.keyword(r, "to")?)?;
                line.end(r)?;
                spec.window = Some((lo, hi));
            }
            "fundamental_triangles" => {
                fundamental = Some(
                    rest.trim()
                        .parse::<usize>()
                        .map_err(|_| line.err(line.offset(rest), "expected a count"))?,
                );
            }
            "closed_form" => {
                let (prov, r) = first_word(rest);
                let provenance = match prov {
                    "paper" => Provenance::Paper,
                    "derived" => Provenance::Derived,
                    _ => return Err(line.err(line.offset(rest), "expected `paper` or `derived`")),
                };
                let (head, values) = r
                    .split_once(':')
                    .ok_or_else(|| line.err(line.offset(r), "expected `:` before values"))?;
                let when = if head.trim().is_empty() {
                    vec![]
                } else {
                    line.assignments(line.keyword(head, "when")?, ',')?
                };
                spec.closed_forms.push(ClosedForm {
                    provenance,
                    when,
                    values: line.assignments(values, ';')?,
                });
            }
            _ => return Err(line.err(line.offset(text.trim_start()), format!("unknown directive `{kw}`"))),
        }
    }
    let nv = spec.vertices.len();
    for (line, off, i) in deferred {
        if i >= nv {
            return Err(Error::Parse {
                line,
                col: off + 1,
                msg: format!("index {} exceeds vertex count {nv}", i + 1),
            });
        }
    }
    if spec.name.is_empty() {
        return Err(Error::Parse {
            line: 1,
            col: 1,
            msg: "missing `name`".into(),
        });
    }
    spec.fundamental_triangles = fundamental.unwrap_or(spec.triangles.len());
    spec.validate().map_err(|e| Error::Parse {
        line: 0,
        col: 0,
        msg: e.to_string(),
    })?;
    Ok(spec)
}

fn tuple_str(v: &ExprVec) -> String {
    format!("({}, {}, {})", v[0], v[1], v[2])
}

fn bound_str(e: &Expr) -> String {
    match e {
        Expr::Num(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
        e => e.to_string(),
    }
}

pub fn serialize_domain_spec(spec: &DomainSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "name {}", spec.name);
    for (k, v) in &spec.meta {
        let _ = writeln!(s, "meta {k} {v}");
    }
    for p in &spec.parameters {
        let _ = writeln!(
            s,
            "param {} = {} in {}{}, {}{} {}",
            p.name,
            p.default,
            if p.lo_open { '(' } else { '[' },
            bound_str(&p.lo),
            bound_str(&p.hi),
            if p.hi_open { ')' } else { ']' },
            if p.free { "free" } else { "fixed" }
        );
    }
    for (n, e) in &spec.lets {
        let _ = writeln!(s, "let {n} = {e}");
    }
    for v in &spec.vertices {
        match v {
            VertexDecl::Coords(c) => {
                let _ = writeln!(s, "vertex {}", tuple_str(c));
            }
            VertexDecl::Intersect(i) => {
                let _ = writeln!(
                    s,
                    "vertex intersect {} {} {} {}",
                    i[0] + 1,
                    i[1] + 1,
                    i[2] + 1,
                    i[3] + 1
                );
            }
        }
    }
    for t in &spec.triangles {
        let _ = writeln!(s, "triangle {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    for (v, c) in &spec.constraints {
        let body = match c {
            ConstraintDecl::Fixed => "fixed".to_string(),
            ConstraintDecl::Free => "free".to_string(),
            ConstraintDecl::OnPlane { point, normal } => {
                format!("plane {} normal {}", tuple_str(point), tuple_str(normal))
            }
            ConstraintDecl::OnLine { point, direction } => {
                format!("line {} dir {}", tuple_str(point), tuple_str(direction))
            }
        };
        let _ = writeln!(s, "constraint {} {body}", v + 1);
    }
    for g in &spec.generators {
        let body = match g {
            GeneratorDecl::HalfTurn(a, b) => format!("halfturn {} {}", a + 1, b + 1),
            GeneratorDecl::HalfTurnLine { point, direction } => {
                format!("halfturn_line {} dir {}", tuple_str(point), tuple_str(direction))
            }
            GeneratorDecl::Reflect { point, normal } => {
                format!("reflect {} normal {}", tuple_str(point), tuple_str(normal))
            }
            GeneratorDecl::Rotate { point, axis, angle } => {
                format!("rotate {} axis {} angle {angle}", tuple_str(point), tuple_str(axis))
            }
            GeneratorDecl::Translate(v) => format!("translate {}", tuple_str(v)),
        };
        let _ = writeln!(s, "generator {body}");
    }
    for p in &spec.periods {
        let _ = writeln!(s, "period {}", tuple_str(p));
    }
    if let Some((lo, hi)) = &spec.window {
        let _ = writeln!(s, "window {} to {}", tuple_str(lo), tuple_str(hi));
    }
    let _ = writeln!(s, "fundamental_triangles {}", spec.fundamental_triangles);
    for cf in &spec.closed_forms {
        let prov = match cf.provenance {
            Provenance::Paper => "paper",
            Provenance::Derived => "derived",
        };
        let when: Vec<String> = cf.when.iter().map(|(n, e)| format!("{n} = {e}")).collect();
        let vals: Vec<String> = cf.values.iter().map(|(n, e)| format!("{n} = {e}")).collect();
        let head = if when.is_empty() {
            String::new()
        } else {
            format!(" when {}", when.join(", "))
        };
        let _ = writeln!(s, "closed_form {prov}{head} : {}", vals.join("; "));
    }
    s
}
