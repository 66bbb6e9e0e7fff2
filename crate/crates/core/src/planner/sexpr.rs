//! Plan text format: a small s-expression reader and a canonical printer.
//!
//! ```text
//! (sequence
//!   (achieve (entity-picked-up cup-1)
//!     (perceive cup-1)
//!     (at-location (a location (to pick-up) (the object cup-1)))))
//! ```
//! A resolved designator carries `(at x y probability)`; a joint one names
//! `(the objects a b)`. `;` starts a comment running to the end of the line.

use super::{Designator, Goal, PlanError, PlanNode, Purpose, ResolvedLocation};

#[derive(Debug, Clone, PartialEq)]
enum Sx {
    Atom(String),
    List(Vec<Sx>),
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut comment = false;
    for ch in text.chars() {
        if comment {
            comment = ch != '\n';
            continue;
        }
        match ch {
            ';' => {
                comment = true;
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn read(tokens: &[String], pos: &mut usize) -> Result<Sx, PlanError> {
    let tok = tokens.get(*pos).ok_or_else(|| PlanError::Parse("unexpected end of input".into()))?;
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos).map(String::as_str) {
                    Some(")") => {
                        *pos += 1;
                        return Ok(Sx::List(items));
                    }
                    Some(_) => items.push(read(tokens, pos)?),
                    None => return Err(PlanError::Parse("unclosed parenthesis".into())),
                }
            }
        }
        ")" => Err(PlanError::Parse("unexpected ')'".into())),
        a => Ok(Sx::Atom(a.to_string())),
    }
}

fn atom(sx: &Sx) -> Result<&str, PlanError> {
    match sx {
        Sx::Atom(a) => Ok(a),
        Sx::List(_) => Err(PlanError::Parse("expected a symbol".into())),
    }
}

fn list(sx: &Sx) -> Result<&[Sx], PlanError> {
    match sx {
        Sx::List(l) => Ok(l),
        Sx::Atom(a) => Err(PlanError::Parse(format!("expected a list, found {a}"))),
    }
}

fn number(sx: &Sx) -> Result<f64, PlanError> {
    let a = atom(sx)?;
    a.parse().map_err(|_| PlanError::Parse(format!("expected a number, found {a}")))
}

fn node(sx: &Sx) -> Result<PlanNode, PlanError> {
    let items = list(sx)?;
    let head = items.first().ok_or_else(|| PlanError::Parse("empty form".into()))?;
    let children = |from: usize| items[from..].iter().map(node).collect::<Result<Vec<_>, _>>();
    match atom(head)? {
        "sequence" => Ok(PlanNode::Sequence { children: children(1)? }),
        "achieve" => {
            let g = list(items.get(1).ok_or_else(|| PlanError::Parse("achieve needs a goal".into()))?)?;
            let predicate = atom(g.first().ok_or_else(|| PlanError::Parse("empty goal".into()))?)?.to_string();
            let args = g[1..].iter().map(|a| atom(a).map(str::to_string)).collect::<Result<_, _>>()?;
            Ok(PlanNode::Achieve { goal: Goal { predicate, args }, children: children(2)? })
        }
        "perceive" => {
            if items.len() != 2 {
                return Err(PlanError::Parse("perceive takes one object".into()));
            }
            Ok(PlanNode::Perceive { object: atom(&items[1])?.to_string() })
        }
        "at-location" => {
            let d = designator(items.get(1).ok_or_else(|| PlanError::Parse("at-location needs a designator".into()))?)?;
            Ok(PlanNode::AtLocation { location: d, children: children(2)? })
        }
        other => Err(PlanError::Parse(format!("unknown form {other}"))),
    }
}

fn designator(sx: &Sx) -> Result<Designator, PlanError> {
    let items = list(sx)?;
    if items.len() < 2 || atom(&items[0])? != "a" || atom(&items[1])? != "location" {
        return Err(PlanError::Parse("designator must start with (a location".into()));
    }
    let mut purpose = None;
    let mut objects = Vec::new();
    let mut resolved = None;
    for clause in &items[2..] {
        let c = list(clause)?;
        match c.first().map(atom).transpose()? {
            Some("to") if c.len() == 2 => {
                purpose = Some(match atom(&c[1])? {
                    "pick-up" => Purpose::PickUp,
                    "put-down" => Purpose::PutDown,
                    "joint-pick-up" => Purpose::JointPickUp,
                    other => return Err(PlanError::Parse(format!("unknown purpose {other}"))),
                })
            }
            Some("the") if c.len() >= 3 => {
                let kind = atom(&c[1])?;
                if kind != "object" && kind != "objects" {
                    return Err(PlanError::Parse(format!("unknown clause (the {kind} ...)")));
                }
                objects = c[2..].iter().map(|a| atom(a).map(str::to_string)).collect::<Result<_, _>>()?;
            }
            Some("at") if c.len() == 4 => {
                resolved = Some(ResolvedLocation { x: number(&c[1])?, y: number(&c[2])?, probability: number(&c[3])? })
            }
            _ => return Err(PlanError::Parse("malformed designator clause".into())),
        }
    }
    let purpose = purpose.ok_or_else(|| PlanError::Parse("designator lacks (to ...)".into()))?;
    if objects.is_empty() {
        return Err(PlanError::Parse("designator names no object".into()));
    }
    Ok(Designator { purpose, objects, resolved })
}

pub fn parse_plan(text: &str) -> Result<PlanNode, PlanError> {
    let tokens = tokenize(text);
    let mut pos = 0;
    let sx = read(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(PlanError::Parse("trailing input after plan".into()));
    }
    node(&sx)
}

fn write_designator(d: &Designator) -> String {
    let purpose = match d.purpose {
        Purpose::PickUp => "pick-up",
        Purpose::PutDown => "put-down",
        Purpose::JointPickUp => "joint-pick-up",
    };
    let kind = if d.objects.len() == 1 { "object" } else { "objects" };
    let mut s = format!("(a location (to {purpose}) (the {kind} {})", d.objects.join(" "));
    if let Some(r) = &d.resolved {
        s.push_str(&format!(" (at {} {} {})", r.x, r.y, r.probability));
    }
    s.push(')');
    s
}

fn write_node(n: &PlanNode, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    let (head, children) = match n {
        PlanNode::Sequence { children } => ("(sequence".to_string(), children.as_slice()),
        PlanNode::Achieve { goal, children } => {
            let mut g = format!("({}", goal.predicate);
            for a in &goal.args {
                g.push(' ');
                g.push_str(a);
            }
            (format!("(achieve {g})"), children.as_slice())
        }
        PlanNode::Perceive { object } => (format!("(perceive {object}"), &[][..]),
        PlanNode::AtLocation { location, children } => (format!("(at-location {}", write_designator(location)), children.as_slice()),
    };
    out.push_str(&pad);
    out.push_str(&head);
    for c in children {
        out.push('\n');
        write_node(c, indent + 1, out);
    }
    out.push(')');
}

/// Canonical text form; `parse_plan(&write_plan(p)) == p`.
pub fn write_plan(plan: &PlanNode) -> String {
    let mut s = String::new();
    write_node(plan, 0, &mut s);
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_plan_with_comments() {
        let text = "; two cups\n(sequence (achieve (entity-picked-up cup-1) (perceive cup-1)\n (at-location (a location (to pick-up) (the object cup-1)))))";
        let p = parse_plan(text).unwrap();
        let PlanNode::Sequence { children } = &p else { panic!() };
        let PlanNode::Achieve { goal, children } = &children[0] else { panic!() };
        assert_eq!(goal.predicate, "entity-picked-up");
        assert_eq!(goal.args, vec!["cup-1"]);
        assert_eq!(children[0], PlanNode::Perceive { object: "cup-1".into() });
        assert_eq!(parse_plan(&write_plan(&p)).unwrap(), p);
    }

    #[test]
    fn resolved_and_joint_designators_round_trip() {
        let text = "(at-location (a location (to joint-pick-up) (the objects cup-1 cup-2) (at 1.25 -0.5 0.9125)))";
        let p = parse_plan(text).unwrap();
        let PlanNode::AtLocation { location, .. } = &p else { panic!() };
        assert_eq!(location.objects.len(), 2);
        assert_eq!(location.resolved, Some(ResolvedLocation { x: 1.25, y: -0.5, probability: 0.9125 }));
        assert_eq!(parse_plan(&write_plan(&p)).unwrap(), p);
    }

    #[test]
    fn malformed_inputs() {
        for bad in ["(sequence", "(fly cup)", "(perceive)", "(at-location (a place (to pick-up)))", "(sequence))", "(at-location (a location (to pick-up)))"] {
            assert!(parse_plan(bad).is_err(), "{bad}");
        }
    }
}
