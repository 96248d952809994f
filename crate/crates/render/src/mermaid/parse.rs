//! Parser for the mermaid subset the built-in renderer draws: flowcharts,
//! sequence diagrams and class diagrams.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "Parse error: {}", self.message)
        } else {
            write!(f, "Parse error on line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ParseError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagram {
    Flowchart(Flowchart),
    Sequence(Sequence),
    Class(ClassDiagram),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    TopDown,
    BottomUp,
    LeftRight,
    RightLeft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Rect,
    Round,
    Stadium,
    Subroutine,
    Cylinder,
    Circle,
    DoubleCircle,
    Rhombus,
    Hexagon,
    Parallelogram,
    Trapezoid,
    Asymmetric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowNode {
    pub id: String,
    pub label: String,
    pub shape: Shape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeStyle {
    Solid,
    Dotted,
    Thick,
    Invisible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowEdge {
    pub from: String,
    pub to: String,
    pub label: Option<String>,
    pub style: EdgeStyle,
    pub arrow: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph {
    pub id: String,
    pub title: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flowchart {
    pub direction: Direction,
    pub nodes: Vec<FlowNode>,
    pub edges: Vec<FlowEdge>,
    pub subgraphs: Vec<Subgraph>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Participant {
    pub id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeqItem {
    Message {
        from: String,
        to: String,
        text: String,
        dashed: bool,
    },
    Note {
        over: Vec<String>,
        text: String,
    },
    Block {
        kind: String,
        label: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub participants: Vec<Participant>,
    pub items: Vec<SeqItem>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassBox {
    pub name: String,
    pub annotation: Option<String>,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub from: String,
    pub to: String,
    pub kind: String,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDiagram {
    pub classes: Vec<ClassBox>,
    pub relations: Vec<Relation>,
}

const UNSUPPORTED_TYPES: [&str; 14] = [
    "stateDiagram",
    "stateDiagram-v2",
    "erDiagram",
    "gantt",
    "pie",
    "journey",
    "gitGraph",
    "mindmap",
    "timeline",
    "quadrantChart",
    "requirementDiagram",
    "C4Context",
    "sankey-beta",
    "xychart-beta",
];

/// Parses a diagram; the error names the first offending line.
pub fn parse(source: &str) -> Result<Diagram, ParseError> {
    let lines: Vec<(usize, &str)> = source.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
    let mut idx = 0;
    // Optional front matter.
    if lines.iter().find(|(_, l)| !l.trim().is_empty()).map(|(_, l)| l.trim()) == Some("---") {
        let open = lines.iter().position(|(_, l)| l.trim() == "---").expect("found above");
        match lines[open + 1..].iter().position(|(_, l)| l.trim() == "---") {
            Some(close) => idx = open + 1 + close + 1,
            None => return err(lines[open].0, "unterminated front matter"),
        }
    }
    let body: Vec<(usize, &str)> = lines[idx..]
        .iter()
        .copied()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with("%%")
        })
        .collect();
    let Some(&(hline, header)) = body.first() else {
        return err(0, "empty diagram");
    };
    let header = header.trim().trim_end_matches(';');
    let mut words = header.split_whitespace();
    let kind = words.next().unwrap_or("");
    let rest = &body[1..];
    let diagram = match kind {
        "flowchart" | "graph" => {
            let direction = match words.next() {
                None | Some("TD") | Some("TB") => Direction::TopDown,
                Some("BT") => Direction::BottomUp,
                Some("LR") => Direction::LeftRight,
                Some("RL") => Direction::RightLeft,
                Some(other) => return err(hline, format!("unknown flowchart direction '{other}'")),
            };
            if let Some(extra) = words.next() {
                return err(hline, format!("unexpected '{extra}' after flowchart header"));
            }
            Diagram::Flowchart(parse_flowchart(direction, rest)?)
        }
        "sequenceDiagram" => Diagram::Sequence(parse_sequence(rest)?),
        "classDiagram" | "classDiagram-v2" => Diagram::Class(parse_class(rest)?),
        k if UNSUPPORTED_TYPES.contains(&k) => return err(hline, format!("diagram type '{k}' is not supported")),
        k => return err(hline, format!("no diagram type detected for '{k}'")),
    };
    let empty = match &diagram {
        Diagram::Flowchart(f) => f.nodes.is_empty(),
        Diagram::Sequence(s) => s.participants.is_empty(),
        Diagram::Class(c) => c.classes.is_empty(),
    };
    if empty {
        return err(hline, "diagram has no content");
    }
    Ok(diagram)
}

/// Splits on `;` outside quotes, brackets and edge-label pipes.
fn split_statements(line: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut in_quote = false;
    let mut in_pipe = false;
    let mut start = 0;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quote = !in_quote,
            '|' if !in_quote => in_pipe = !in_pipe,
            '[' | '(' | '{' if !in_quote && !in_pipe => depth += 1,
            ']' | ')' | '}' if !in_quote && !in_pipe => depth -= 1,
            ';' if !in_quote && !in_pipe && depth <= 0 => {
                out.push(&line[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&line[start..]);
    out
}

fn decode_text(s: &str) -> String {
    s.replace("#quot;", "\"")
        .replace("#35;", "#")
        .replace("<br/>", "\n")
        .replace("<br />", "\n")
        .replace("<br>", "\n")
}

fn is_id_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line,
            _src: src,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn starts_with(&self, s: &str) -> bool {
        let mut i = self.pos;
        for c in s.chars() {
            if self.chars.get(i) != Some(&c) {
                return false;
            }
            i += 1;
        }
        true
    }

    fn bump(&mut self, n: usize) {
        self.pos += n;
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn count(&self, c: char) -> usize {
        self.chars[self.pos..].iter().take_while(|&&x| x == c).count()
    }

    fn rest(&self) -> String {
        self.chars[self.pos..].iter().collect()
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        err(self.line, message)
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(c) => format!("'{c}'"),
            None => "end of line".into(),
        }
    }
}

/// (opener, accepted closers, shape), longest opener first.
const SHAPES: [(&str, &[&str], Shape); 12] = [
    ("(((", &[")))"], Shape::DoubleCircle),
    ("((", &["))"], Shape::Circle),
    ("([", &["])"], Shape::Stadium),
    ("[[", &["]]"], Shape::Subroutine),
    ("[(", &[")]"], Shape::Cylinder),
    ("[/", &["/]", "\\]"], Shape::Parallelogram),
    ("[\\", &["\\]", "/]"], Shape::Trapezoid),
    ("{{", &["}}"], Shape::Hexagon),
    ("(", &[")"], Shape::Round),
    ("[", &["]"], Shape::Rect),
    ("{", &["}"], Shape::Rhombus),
    (">", &["]"], Shape::Asymmetric),
];

const UNQUOTED_FORBIDDEN: [char; 8] = ['[', ']', '{', '}', '(', ')', '"', '|'];

struct FlowBuilder {
    nodes: Vec<FlowNode>,
    index: BTreeMap<String, usize>,
    edges: Vec<FlowEdge>,
    subgraphs: Vec<Subgraph>,
    open: Vec<usize>,
}

impl FlowBuilder {
    fn touch(&mut self, id: &str, shape: Option<(Shape, String)>) {
        let idx = match self.index.get(id) {
            Some(&i) => i,
            None => {
                self.nodes.push(FlowNode {
                    id: id.to_string(),
                    label: id.to_string(),
                    shape: Shape::Rect,
                });
                self.index.insert(id.to_string(), self.nodes.len() - 1);
                self.nodes.len() - 1
            }
        };
        if let Some((shape, label)) = shape {
            self.nodes[idx].shape = shape;
            self.nodes[idx].label = label;
        }
        if let Some(&sg) = self.open.last() {
            if !self.subgraphs[sg].members.iter().any(|m| m == id) {
                self.subgraphs[sg].members.push(id.to_string());
            }
        }
    }
}

fn parse_flowchart(direction: Direction, lines: &[(usize, &str)]) -> Result<Flowchart, ParseError> {
    let mut b = FlowBuilder {
        nodes: Vec::new(),
        index: BTreeMap::new(),
        edges: Vec::new(),
        subgraphs: Vec::new(),
        open: Vec::new(),
    };
    for &(line, text) in lines {
        for stmt in split_statements(text) {
            let stmt = stmt.trim();
            if stmt.is_empty() {
                continue;
            }
            let first = stmt.split_whitespace().next().unwrap_or("");
            match first {
                "subgraph" => {
                    let spec = stmt["subgraph".len()..].trim();
                    let (id, title) = parse_subgraph_header(spec, line)?;
                    b.subgraphs.push(Subgraph {
                        id,
                        title,
                        members: Vec::new(),
                    });
                    b.open.push(b.subgraphs.len() - 1);
                }
                "end" if stmt == "end" => {
                    if b.open.pop().is_none() {
                        return err(line, "'end' without an open subgraph");
                    }
                }
                "classDef" | "class" | "style" | "linkStyle" | "click" | "direction" => {}
                _ => parse_chain(stmt, line, &mut b)?,
            }
        }
    }
    if !b.open.is_empty() {
        let last = lines.last().map(|l| l.0).unwrap_or(0);
        return err(last, "subgraph not closed with 'end'");
    }
    Ok(Flowchart {
        direction,
        nodes: b.nodes,
        edges: b.edges,
        subgraphs: b.subgraphs,
    })
}

fn parse_subgraph_header(spec: &str, line: usize) -> Result<(String, String), ParseError> {
    if spec.is_empty() {
        return Ok((format!("subgraph{line}"), String::new()));
    }
    if let Some(q) = spec.strip_prefix('"') {
        let Some(end) = q.find('"') else {
            return err(line, "unterminated string in subgraph title");
        };
        let title = decode_text(&q[..end]);
        return Ok((title.clone(), title));
    }
    let id: String = spec.chars().take_while(|&c| is_id_char(c)).collect();
    if id.is_empty() {
        return err(line, format!("invalid subgraph id in '{spec}'"));
    }
    let rest = spec[id.len()..].trim();
    if rest.is_empty() {
        return Ok((id.clone(), id));
    }
    let inner = rest
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| ParseError {
            line,
            message: format!("unexpected '{rest}' after subgraph id"),
        })?;
    let title = inner.trim().trim_matches('"');
    Ok((id, decode_text(title)))
}

fn parse_chain(stmt: &str, line: usize, b: &mut FlowBuilder) -> Result<(), ParseError> {
    let mut cur = Cursor::new(stmt, line);
    let mut left = parse_node_group(&mut cur, b)?;
    loop {
        cur.skip_ws();
        if cur.at_end() {
            break;
        }
        let (style, arrow, label) = parse_edge(&mut cur)?;
        cur.skip_ws();
        let right = parse_node_group(&mut cur, b)?;
        for from in &left {
            for to in &right {
                b.edges.push(FlowEdge {
                    from: from.clone(),
                    to: to.clone(),
                    label: label.clone(),
                    style,
                    arrow,
                });
            }
        }
        left = right;
    }
    Ok(())
}

fn parse_node_group(cur: &mut Cursor<'_>, b: &mut FlowBuilder) -> Result<Vec<String>, ParseError> {
    let mut ids = vec![parse_node(cur, b)?];
    loop {
        let save = cur.pos;
        cur.skip_ws();
        if cur.peek() == Some('&') {
            cur.bump(1);
            cur.skip_ws();
            ids.push(parse_node(cur, b)?);
        } else {
            cur.pos = save;
            return Ok(ids);
        }
    }
}

fn parse_node(cur: &mut Cursor<'_>, b: &mut FlowBuilder) -> Result<String, ParseError> {
    let start = cur.pos;
    while cur.peek().is_some_and(is_id_char) {
        cur.bump(1);
    }
    let id: String = cur.chars[start..cur.pos].iter().collect();
    if id.is_empty() {
        return cur.fail(format!("expected a node id, found {}", cur.found()));
    }
    if id == "end" {
        return cur.fail("'end' is reserved and cannot be a node id");
    }
    let mut shape = None;
    for (open, closers, kind) in SHAPES {
        if cur.starts_with(open) {
            cur.bump(open.chars().count());
            let label = parse_node_text(cur, closers)?;
            shape = Some((kind, label));
            break;
        }
    }
    if cur.starts_with(":::") {
        cur.bump(3);
        while cur.peek().is_some_and(|c| is_id_char(c) || c == '-') {
            cur.bump(1);
        }
    }
    b.touch(&id, shape);
    Ok(id)
}

fn parse_node_text(cur: &mut Cursor<'_>, closers: &[&str]) -> Result<String, ParseError> {
    let save = cur.pos;
    cur.skip_ws();
    if cur.peek() == Some('"') {
        cur.bump(1);
        let start = cur.pos;
        while cur.peek().is_some_and(|c| c != '"') {
            cur.bump(1);
        }
        if cur.at_end() {
            return cur.fail("unterminated string in node text");
        }
        let text: String = cur.chars[start..cur.pos].iter().collect();
        cur.bump(1);
        cur.skip_ws();
        for close in closers {
            if cur.starts_with(close) {
                cur.bump(close.chars().count());
                return Ok(decode_text(&text));
            }
        }
        return cur.fail(format!("expected '{}' after quoted text, found {}", closers[0], cur.found()));
    }
    cur.pos = save;
    let start = cur.pos;
    loop {
        if cur.at_end() {
            return cur.fail(format!("node text not closed with '{}'", closers[0]));
        }
        if let Some(close) = closers.iter().find(|c| cur.starts_with(c)) {
            let text: String = cur.chars[start..cur.pos].iter().collect();
            if let Some(bad) = text.chars().find(|c| UNQUOTED_FORBIDDEN.contains(c)) {
                return err(
                    cur.line,
                    format!("unquoted node text '{text}' contains '{bad}'; wrap the text in double quotes"),
                );
            }
            if text.trim().is_empty() {
                return cur.fail("empty node text");
            }
            cur.bump(close.chars().count());
            return Ok(decode_text(text.trim()));
        }
        cur.bump(1);
    }
}

fn parse_edge_label_until(cur: &mut Cursor<'_>, terminator: &str, op: &str) -> Result<String, ParseError> {
    let start = cur.pos;
    // A label of the `-- text -->` form ends where the closing operator starts.
    while !cur.at_end() {
        if cur.starts_with(terminator) {
            let text: String = cur.chars[start..cur.pos].iter().collect();
            let text = text.trim().trim_matches('"').to_string();
            if text.is_empty() {
                return cur.fail(format!("empty label in '{op}' edge"));
            }
            return Ok(decode_text(&text));
        }
        cur.bump(1);
    }
    cur.fail(format!("edge label after '{op}' is not closed"))
}

fn is_head(cur: &Cursor<'_>) -> bool {
    match cur.peek() {
        Some('>') => true,
        Some('o') | Some('x') => !cur.peek_at(1).is_some_and(is_id_char),
        _ => false,
    }
}

fn parse_edge(cur: &mut Cursor<'_>) -> Result<(EdgeStyle, bool, Option<String>), ParseError> {
    let start_rest = cur.rest();
    if cur.peek() == Some('<') || (matches!(cur.peek(), Some('o') | Some('x')) && matches!(cur.peek_at(1), Some('-') | Some('='))) {
        cur.bump(1);
    }
    let mut label = None;
    let (style, arrow) = match cur.peek() {
        Some('-') => {
            let n = cur.count('-');
            if n == 1 && cur.peek_at(1) == Some('.') {
                cur.bump(1);
                let dots = cur.count('.');
                cur.bump(dots);
                if cur.peek() == Some('-') {
                    let n = cur.count('-');
                    cur.bump(n);
                } else {
                    label = Some(parse_edge_label_until(cur, ".-", "-.")?);
                    let dots = cur.count('.');
                    cur.bump(dots);
                    let n = cur.count('-');
                    if n == 0 {
                        return cur.fail("dotted edge label must end with '.-' or '.->'");
                    }
                    cur.bump(n);
                }
                let arrow = is_head(cur);
                if arrow {
                    cur.bump(1);
                }
                (EdgeStyle::Dotted, arrow)
            } else if n >= 2 {
                cur.bump(n);
                if is_head(cur) {
                    cur.bump(1);
                    (EdgeStyle::Solid, true)
                } else if n >= 3 {
                    (EdgeStyle::Solid, false)
                } else {
                    label = Some(parse_edge_label_until(cur, "--", "--")?);
                    let n = cur.count('-');
                    cur.bump(n);
                    let arrow = is_head(cur);
                    if arrow {
                        cur.bump(1);
                    } else if n < 3 {
                        return cur.fail("edge label must end with '-->' or '---'");
                    }
                    (EdgeStyle::Solid, arrow)
                }
            } else {
                return cur.fail(format!("expected an edge, found '{}'", start_rest));
            }
        }
        Some('=') => {
            let n = cur.count('=');
            if n < 2 {
                return cur.fail(format!("expected an edge, found '{}'", start_rest));
            }
            cur.bump(n);
            if is_head(cur) {
                cur.bump(1);
                (EdgeStyle::Thick, true)
            } else if n >= 3 {
                (EdgeStyle::Thick, false)
            } else {
                label = Some(parse_edge_label_until(cur, "==", "==")?);
                let n = cur.count('=');
                cur.bump(n);
                let arrow = is_head(cur);
                if arrow {
                    cur.bump(1);
                }
                (EdgeStyle::Thick, arrow)
            }
        }
        Some('~') if cur.count('~') >= 3 => {
            let n = cur.count('~');
            cur.bump(n);
            (EdgeStyle::Invisible, false)
        }
        _ => return cur.fail(format!("expected an edge or end of statement, found {}", cur.found())),
    };
    cur.skip_ws();
    if cur.peek() == Some('|') {
        cur.bump(1);
        let start = cur.pos;
        while cur.peek().is_some_and(|c| c != '|') {
            cur.bump(1);
        }
        if cur.at_end() {
            return cur.fail("edge label not closed with '|'");
        }
        let text: String = cur.chars[start..cur.pos].iter().collect();
        cur.bump(1);
        label = Some(decode_text(text.trim().trim_matches('"')));
    }
    Ok((style, arrow, label))
}

const SEQ_ARROWS: [(&str, bool); 10] = [
    ("<<-->>", true),
    ("<<->>", false),
    ("-->>", true),
    ("->>", false),
    ("--x", true),
    ("-x", false),
    ("--)", true),
    ("-)", false),
    ("-->", true),
    ("->", false),
];

fn valid_participant(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| is_id_char(c) || c == '-' || c == '.' || c == ' ') && !s.starts_with(' ')
}

fn parse_sequence(lines: &[(usize, &str)]) -> Result<Sequence, ParseError> {
    let mut participants: Vec<Participant> = Vec::new();
    let mut items = Vec::new();
    let mut blocks: Vec<String> = Vec::new();
    let ensure = |id: &str, label: Option<&str>, participants: &mut Vec<Participant>| {
        if let Some(p) = participants.iter_mut().find(|p| p.id == id) {
            if let Some(l) = label {
                p.label = l.to_string();
            }
        } else {
            participants.push(Participant {
                id: id.to_string(),
                label: label.unwrap_or(id).to_string(),
            });
        }
    };
    for &(line, raw) in lines {
        let stmt = raw.trim().trim_end_matches(';').trim();
        let (first, rest) = match stmt.split_once(char::is_whitespace) {
            Some((f, r)) => (f, r.trim()),
            None => (stmt, ""),
        };
        match first {
            "participant" | "actor" => {
                let (id, label) = match rest.split_once(" as ") {
                    Some((id, label)) => (id.trim(), Some(label.trim())),
                    None => (rest, None),
                };
                if !valid_participant(id) {
                    return err(line, format!("invalid participant '{id}'"));
                }
                ensure(id, label, &mut participants);
            }
            "loop" | "alt" | "opt" | "par" | "critical" | "break" | "rect" | "box" => {
                blocks.push(first.to_string());
                items.push(SeqItem::Block {
                    kind: first.to_string(),
                    label: rest.to_string(),
                });
            }
            "else" | "and" | "option" => {
                if blocks.is_empty() {
                    return err(line, format!("'{first}' outside of a block"));
                }
                items.push(SeqItem::Block {
                    kind: first.to_string(),
                    label: rest.to_string(),
                });
            }
            "end" if rest.is_empty() => {
                if blocks.pop().is_none() {
                    return err(line, "'end' without an open block");
                }
            }
            "activate" | "deactivate" => {
                if !valid_participant(rest) {
                    return err(line, format!("invalid participant '{rest}'"));
                }
            }
            "autonumber" | "title" | "create" | "destroy" | "links" | "link" | "properties" => {}
            _ if first.eq_ignore_ascii_case("note") => {
                let Some((place, text)) = rest.split_once(':') else {
                    return err(line, "note needs ': text'");
                };
                let place = place.trim();
                let lower = place.to_ascii_lowercase();
                let targets = ["left of ", "right of ", "over "]
                    .iter()
                    .find_map(|p| lower.starts_with(p).then(|| &place[p.len()..]))
                    .ok_or_else(|| ParseError {
                        line,
                        message: format!("note placement '{place}' not understood"),
                    })?;
                let over: Vec<String> = targets.split(',').map(|s| s.trim().to_string()).collect();
                for p in &over {
                    if !valid_participant(p) {
                        return err(line, format!("invalid participant '{p}'"));
                    }
                    ensure(p, None, &mut participants);
                }
                items.push(SeqItem::Note {
                    over,
                    text: decode_text(text.trim()),
                });
            }
            _ => {
                let Some((pos, arrow, dashed)) = SEQ_ARROWS
                    .iter()
                    .filter_map(|&(a, d)| stmt.find(a).map(|p| (p, a, d)))
                    .min_by_key(|&(p, a, _)| (p, std::cmp::Reverse(a.len())))
                else {
                    return err(line, format!("unrecognized statement '{stmt}'"));
                };
                let from = stmt[..pos].trim();
                let after = &stmt[pos + arrow.len()..];
                let Some((to, text)) = after.split_once(':') else {
                    return err(line, "message needs ': text'");
                };
                let to = to.trim().trim_start_matches(['+', '-']).trim();
                if !valid_participant(from) || !valid_participant(to) {
                    return err(line, format!("invalid message participants in '{stmt}'"));
                }
                ensure(from, None, &mut participants);
                ensure(to, None, &mut participants);
                items.push(SeqItem::Message {
                    from: from.to_string(),
                    to: to.to_string(),
                    text: decode_text(text.trim()),
                    dashed,
                });
            }
        }
    }
    if !blocks.is_empty() {
        let last = lines.last().map(|l| l.0).unwrap_or(0);
        return err(last, format!("'{}' block not closed with 'end'", blocks.last().unwrap()));
    }
    Ok(Sequence { participants, items })
}

const CLASS_RELATIONS: [&str; 16] = [
    "<|--", "--|>", "<|..", "..|>", "*--", "--*", "o--", "--o", "<-->", "-->", "<--", "..>", "<..", "--", "..", "()--",
];

fn class_name(s: &str) -> Option<String> {
    let s = s.trim();
    let base = s.split('~').next().unwrap_or("");
    let generic_ok = s.matches('~').count().is_multiple_of(2);
    (!base.is_empty() && base.chars().all(is_id_char) && generic_ok).then(|| s.to_string())
}

fn parse_class(lines: &[(usize, &str)]) -> Result<ClassDiagram, ParseError> {
    let mut classes: Vec<ClassBox> = Vec::new();
    let mut relations = Vec::new();
    let mut open_class: Option<usize> = None;
    let mut namespaces = 0usize;
    fn ensure(classes: &mut Vec<ClassBox>, name: &str) -> usize {
        match classes.iter().position(|c| c.name == name) {
            Some(i) => i,
            None => {
                classes.push(ClassBox {
                    name: name.to_string(),
                    ..Default::default()
                });
                classes.len() - 1
            }
        }
    }
    for &(line, raw) in lines {
        let stmt = raw.trim();
        if let Some(ci) = open_class {
            if stmt == "}" {
                open_class = None;
            } else if let Some(a) = stmt.strip_prefix("<<").and_then(|s| s.strip_suffix(">>")) {
                classes[ci].annotation = Some(a.to_string());
            } else if stmt.contains('{') || stmt.contains('}') {
                return err(line, format!("unexpected brace in class body: '{stmt}'"));
            } else {
                classes[ci].members.push(stmt.to_string());
            }
            continue;
        }
        let first = stmt.split_whitespace().next().unwrap_or("");
        match first {
            "class" => {
                let mut spec = stmt["class".len()..].trim();
                let opens = spec.ends_with('{');
                if opens {
                    spec = spec[..spec.len() - 1].trim();
                }
                let name_part = spec.split(['[', ':']).next().unwrap_or("").trim();
                let Some(name) = class_name(name_part) else {
                    return err(line, format!("invalid class name '{name_part}'"));
                };
                let ci = ensure(&mut classes, &name);
                if opens {
                    open_class = Some(ci);
                }
            }
            "namespace" => {
                if !stmt.ends_with('{') {
                    return err(line, "namespace needs '{'");
                }
                namespaces += 1;
            }
            "}" if stmt == "}" => {
                if namespaces == 0 {
                    return err(line, "unmatched '}'");
                }
                namespaces -= 1;
            }
            "direction" | "note" | "classDef" | "cssClass" | "style" | "link" | "callback" | "click" => {}
            _ if stmt.starts_with("<<") => {
                let Some(end) = stmt.find(">>") else {
                    return err(line, "unterminated annotation");
                };
                let Some(name) = class_name(&stmt[end + 2..]) else {
                    return err(line, "annotation must name a class");
                };
                let ci = ensure(&mut classes, &name);
                classes[ci].annotation = Some(stmt[2..end].to_string());
            }
            _ => {
                let (head, label) = match stmt.split_once(" : ").or_else(|| {
                    // `A : member` or `A --> B : label` with tight colons.
                    stmt.split_once(':')
                }) {
                    Some((h, l)) => (h.trim(), Some(l.trim().to_string())),
                    None => (stmt, None),
                };
                let rel = CLASS_RELATIONS
                    .iter()
                    .filter_map(|op| head.find(op).map(|p| (p, *op)))
                    .min_by_key(|&(p, op)| (p, std::cmp::Reverse(op.len())));
                match rel {
                    Some((p, op)) => {
                        let strip_card = |s: &str| -> String {
                            let s = s.trim();
                            let s = if let Some(r) = s.strip_prefix('"') {
                                r.split_once('"').map(|(_, rest)| rest.trim()).unwrap_or(s)
                            } else {
                                s
                            };
                            let s = if s.ends_with('"') {
                                s.rsplit_once('"')
                                    .and_then(|(l, _)| l.rsplit_once('"'))
                                    .map(|(l, _)| l.trim())
                                    .unwrap_or(s)
                            } else {
                                s
                            };
                            s.to_string()
                        };
                        let from = strip_card(&head[..p]);
                        let to = strip_card(&head[p + op.len()..]);
                        let (Some(from), Some(to)) = (class_name(&from), class_name(&to)) else {
                            return err(line, format!("invalid relation '{stmt}'"));
                        };
                        ensure(&mut classes, &from);
                        ensure(&mut classes, &to);
                        relations.push(Relation {
                            from,
                            to,
                            kind: op.to_string(),
                            label,
                        });
                    }
                    None => match (class_name(head), label) {
                        (Some(name), Some(member)) if !member.is_empty() => {
                            let ci = ensure(&mut classes, &name);
                            classes[ci].members.push(member);
                        }
                        _ => return err(line, format!("unrecognized statement '{stmt}'")),
                    },
                }
            }
        }
    }
    if open_class.is_some() || namespaces > 0 {
        let last = lines.last().map(|l| l.0).unwrap_or(0);
        return err(last, "unclosed '{'");
    }
    Ok(ClassDiagram { classes, relations })
}
