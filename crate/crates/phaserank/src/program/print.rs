use std::fmt::Write;

use super::IntegerProgram;

/// Prints a program in the ITS dialect accepted by `parse_program`.
/// Transitions appear in id order; labeled locations use mangled names.
pub fn print_program(p: &IntegerProgram) -> String {
    let mut s = String::new();
    let pv: Vec<String> = p.program_vars().iter().map(|v| v.to_string()).collect();
    let mut all: Vec<String> = pv.clone();
    all.extend(p.all_temp_vars().iter().map(|v| v.to_string()));
    let args = pv.join(", ");
    writeln!(s, "(GOAL COMPLEXITY)").unwrap();
    writeln!(s, "(STARTTERM (FUNCTIONSYMBOLS {}))", p.initial().mangled()).unwrap();
    writeln!(s, "(VAR {})", all.join(" ")).unwrap();
    writeln!(s, "(RULES").unwrap();
    for t in p.transitions() {
        let rhs: Vec<String> = p.program_vars().iter().map(|v| t.update_of(v).to_string()).collect();
        write!(s, "  {}({}) -> {}({})", t.source.mangled(), args, t.target.mangled(), rhs.join(", ")).unwrap();
        if !t.guard.is_true() {
            write!(s, " :|: {}", t.guard).unwrap();
        }
        s.push('\n');
    }
    s.push_str(")\n");
    s
}

#[cfg(test)]
mod tests {
    use crate::program::parse_program;

    #[test]
    fn round_trip() {
        let text = "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS l0))\n(VAR x y u)\n(RULES\n  l0(x, y) -> l1(u, y)\n  l1(x, y) -> l1(x + y, y - 1) :|: x > 0 && 2*y <= 3\n)\n";
        let p = parse_program(text).unwrap();
        let printed = p.to_string();
        assert_eq!(parse_program(&printed).unwrap(), p);
        assert!(printed.contains("l1(x + y, y - 1) :|: y <= 1 && 1 <= x"), "{printed}");
    }
}
