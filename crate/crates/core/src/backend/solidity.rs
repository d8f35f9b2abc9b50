use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{EmitError, EmitOptions, SolidityArtifact};
use crate::analysis::{Arg, FunctionKind, Operand, Rule, TypedAtom, MSG_SENDER, MSG_VALUE, NOW, SEND};
use crate::frontend::{AggKind, RelationDecl, RelationKind};
use crate::ir::{sanitize_id, AggCacheKind, AssignMode, CompiledContract, Seed, SeedArg, Stmt, TriggerKind, UpdateFunction};
use crate::value::{ColumnType, Value};

const KEYWORDS: &[&str] = &[
    "abstract", "address", "after", "alias", "anonymous", "apply", "as", "assembly", "auto", "bool", "break", "byte",
    "bytes", "calldata", "case", "catch", "constant", "constructor", "continue", "contract", "copyof", "days",
    "default", "define", "delete", "do", "else", "emit", "enum", "error", "ether", "event", "external", "fallback",
    "false", "final", "for", "function", "gwei", "hex", "hours", "if", "immutable", "implements", "import", "in",
    "indexed", "inline", "int", "interface", "internal", "is", "let", "library", "macro", "mapping", "match",
    "memory", "minutes", "modifier", "mutable", "new", "null", "of", "override", "partial", "payable", "pragma",
    "private", "promise", "public", "pure", "receive", "reference", "relocatable", "return", "returns", "revert",
    "sealed", "seconds", "sizeof", "static", "storage", "string", "struct", "super", "supports", "switch", "this",
    "throw", "true", "try", "type", "typedef", "typeof", "uint", "unchecked", "unicode", "using", "var", "view",
    "virtual", "weeks", "wei", "while", "years",
];

fn ident(name: &str) -> String {
    let s = name.replace('\'', "_prime");
    if KEYWORDS.contains(&s.as_str()) {
        format!("{s}_")
    } else {
        s
    }
}

fn upper(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

fn sol_ty(t: ColumnType) -> &'static str {
    match t {
        ColumnType::Int => "int256",
        ColumnType::Uint => "uint256",
        ColumnType::Bool => "bool",
        ColumnType::Address => "address",
    }
}

fn sol_const(v: &Value) -> String {
    match v {
        Value::Int(i) => format!("int256({i})"),
        Value::Uint(u) => format!("uint256({u})"),
        Value::Bool(b) => b.to_string(),
        Value::Address(a) => format!("address(uint160({}))", a.to_full_hex()),
    }
}

fn var(v: &str) -> String {
    format!("v_{}", v.replace('\'', "_prime"))
}

fn operand(o: &Operand) -> String {
    match o {
        Operand::Var(v) => var(v),
        Operand::Const(c) => sol_const(c),
    }
}

fn arg(a: &Arg) -> String {
    match a {
        Arg::Var(v) => var(v),
        Arg::Const(c) => sol_const(c),
        Arg::Wildcard => unreachable!("wildcards never reach emitted expressions"),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Terminal {
    /// Re-check and store the head.
    Assert,
    /// Queue the head as a retraction candidate.
    Retract,
    /// Transaction rule: queue the head as an event.
    Fire,
    /// Derivability check.
    ReturnTrue,
}

struct Emitter<'c> {
    c: &'c CompiledContract,
    opts: &'c EmitOptions,
    out: String,
    depth: usize,
    keys_arrays: BTreeSet<String>,
    group_arrays: BTreeSet<usize>,
    sorted_types: BTreeSet<ColumnType>,
}

impl<'c> Emitter<'c> {
    fn line(&mut self, s: &str) {
        if s.is_empty() {
            self.out.push('\n');
        } else {
            let _ = writeln!(self.out, "{:w$}{s}", "", w = self.depth * 4);
        }
    }

    fn open(&mut self, s: &str) {
        if s.is_empty() {
            self.line("{");
        } else {
            self.line(&format!("{s} {{"));
        }
        self.depth += 1;
    }

    fn close(&mut self) {
        self.depth -= 1;
        self.line("}");
    }

    fn decl(&self, rel: &str) -> &'c RelationDecl {
        self.c.model.relation(rel).expect("declared relation")
    }

    fn stored(&self, rel: &str) -> bool {
        self.c.materialized().contains(rel)
    }

    fn stored_decls(&self) -> Vec<&'c RelationDecl> {
        self.c.model.relations.iter().filter(|d| self.stored(&d.name)).collect()
    }

    fn keys(&self, d: &RelationDecl) -> Vec<usize> {
        if d.kind == RelationKind::Singleton {
            Vec::new()
        } else {
            d.primary_keys.clone()
        }
    }

    fn has_event_rows(&self, rel: &str) -> bool {
        self.c.model.rules.iter().any(|r| r.is_transaction() && r.head.relation == rel)
    }

    fn table(&self, rel: &str) -> String {
        format!("{rel}Table")
    }

    /// Storage path of the row with the given key expressions.
    fn row_path(&self, rel: &str, keys: &[String]) -> String {
        let mut s = self.table(rel);
        for k in keys {
            let _ = write!(s, "[{k}]");
        }
        s
    }

    fn col_params(&self, d: &RelationDecl) -> String {
        d.schema.iter().enumerate().map(|(i, c)| format!("{} c{i}", sol_ty(c.ty))).collect::<Vec<_>>().join(", ")
    }

    fn col_args(&self, d: &RelationDecl) -> String {
        (0..d.arity()).map(|i| format!("c{i}")).collect::<Vec<_>>().join(", ")
    }

    fn field(&self, d: &RelationDecl, col: usize) -> String {
        ident(&d.schema[col].name)
    }

    fn analyse(&mut self) {
        let mut stmts: Vec<&Stmt> = self.c.functions.iter().map(|f| &f.body).collect();
        stmts.extend(self.c.rederive.values().map(|p| &p.body));
        stmts.extend(self.c.full.values());
        for v in self.c.violations() {
            self.keys_arrays.insert(v.clone());
        }
        for s in stmts {
            for st in s.chain() {
                match st {
                    Stmt::Search { relation, constraints, .. } if self.stored(relation) => {
                        let d = self.decl(relation);
                        let keys = self.keys(d);
                        let fixed: Vec<usize> =
                            keys.iter().copied().filter(|k| constraints.iter().any(|(c, _)| c == k)).collect();
                        if fixed.len() < keys.len() && (fixed.is_empty() || !self.has_index(relation, &fixed)) {
                            self.keys_arrays.insert(relation.clone());
                        }
                    }
                    Stmt::AggAssign { cache, group_binds, .. } if !group_binds.is_empty() => {
                        self.group_arrays.insert(*cache);
                    }
                    _ => {}
                }
            }
        }
        for spec in &self.c.agg_caches {
            if spec.kind == AggCacheKind::Ordered {
                let d = self.decl(&spec.relation);
                self.sorted_types.insert(d.schema[spec.value_col.expect("value column")].ty);
            }
        }
    }

    fn has_index(&self, rel: &str, cols: &[usize]) -> bool {
        self.c.join_indexes.iter().any(|j| j.relation == rel && j.constrained == cols)
    }

    fn index_name(&self, rel: &str, cols: &[usize]) -> String {
        let cols: Vec<String> = cols.iter().map(usize::to_string).collect();
        format!("{rel}Index{}", cols.join("_"))
    }

    fn cache_group_types(&self, n: usize) -> Vec<ColumnType> {
        let spec = &self.c.agg_caches[n];
        let d = self.decl(&spec.relation);
        spec.group_cols.iter().map(|&g| d.schema[g].ty).collect()
    }

    fn cache_value_type(&self, n: usize) -> Option<ColumnType> {
        let spec = &self.c.agg_caches[n];
        spec.value_col.map(|v| self.decl(&spec.relation).schema[v].ty)
    }

    fn mapping(&self, keys: &[ColumnType], value: &str) -> String {
        keys.iter().rev().fold(value.to_string(), |acc, k| format!("mapping({} => {acc})", sol_ty(*k)))
    }

    // ---- declarations ----

    fn storage(&mut self) {
        for d in self.stored_decls() {
            let u = upper(&d.name);
            self.open(&format!("struct {u}Tuple"));
            for c in d.non_key_columns() {
                let f = format!("{} {};", sol_ty(d.schema[c].ty), self.field(d, c));
                self.line(&f);
            }
            self.line("bool valid;");
            if self.has_event_rows(&d.name) {
                self.line("bool evt;");
            }
            self.close();
            self.open(&format!("struct {u}Fact"));
            for (i, c) in d.schema.iter().enumerate() {
                let f = format!("{} {};", sol_ty(c.ty), self.field(d, i));
                self.line(&f);
            }
            self.close();
            let key_types: Vec<ColumnType> = self.keys(d).iter().map(|&k| d.schema[k].ty).collect();
            let ty = self.mapping(&key_types, &format!("{u}Tuple"));
            self.line(&format!("{ty} internal {};", self.table(&d.name)));
            for j in self.c.join_indexes.iter().filter(|j| j.relation == d.name) {
                let tys: Vec<ColumnType> = j.constrained.iter().map(|&k| d.schema[k].ty).collect();
                let ty = self.mapping(&tys, &format!("{u}Fact[]"));
                self.line(&format!("{ty} internal {};", self.index_name(&d.name, &j.constrained)));
            }
            if self.keys_arrays.contains(&d.name) {
                self.line(&format!("{u}Fact[] internal {}Keys;", d.name));
            }
            if self.c.model.rules.iter().any(|r| r.head.relation == d.name) {
                self.line(&format!("{u}Fact[] internal {}Pending;", d.name));
            }
            if self.c.model.is_violation(&d.name) {
                self.line(&format!("uint256 internal {}Count;", d.name));
            }
            self.line("");
        }
        if self.c.model.rules.iter().any(|r| r.head.relation == SEND) {
            self.open("struct SendFact");
            self.line("address to;");
            self.line("uint256 amount;");
            self.close();
            self.line("SendFact[] internal sendPending;");
            self.line("");
        }
        for n in 0..self.c.agg_caches.len() {
            let groups = self.cache_group_types(n);
            let value = self.cache_value_type(n);
            let cell = match self.c.agg_caches[n].kind {
                AggCacheKind::Sum => format!("{}Sum", upper(sol_ty(value.expect("sum value")))),
                AggCacheKind::Count => "uint256".to_string(),
                AggCacheKind::Ordered => format!("{}[]", sol_ty(value.expect("ordered value"))),
            };
            let ty = self.mapping(&groups, &cell);
            self.line(&format!("{ty} internal cache{n};"));
            if self.group_arrays.contains(&n) {
                self.open(&format!("struct Cache{n}Key"));
                for (i, t) in groups.iter().enumerate() {
                    self.line(&format!("{} g{i};", sol_ty(*t)));
                }
                self.close();
                self.line(&format!("Cache{n}Key[] internal cache{n}Groups;"));
            }
        }
        let sums: BTreeSet<ColumnType> = (0..self.c.agg_caches.len())
            .filter(|&n| self.c.agg_caches[n].kind == AggCacheKind::Sum)
            .filter_map(|n| self.cache_value_type(n))
            .collect();
        for t in sums {
            self.open(&format!("struct {}Sum", upper(sol_ty(t))));
            self.line(&format!("{} total;", sol_ty(t)));
            self.line("uint256 rows;");
            self.close();
        }
        if !self.c.agg_caches.is_empty() {
            self.line("");
        }
    }

    fn events(&mut self) {
        for tx in self.c.model.transactions() {
            let params = tx.schema.iter().map(|c| format!("{} {}", sol_ty(c.ty), ident(&c.name))).collect::<Vec<_>>().join(", ");
            self.line(&format!("event {}({params});", upper(tx.interface_name())));
        }
        if self.opts.emit_provenance_events {
            self.line("event ProvRead(string rule, string relation, bytes data);");
            self.line("event ProvWrite(string rule, string relation, bytes data);");
        }
        self.line("");
    }

    // ---- entry points ----

    fn entry_body(&mut self, tx: &RelationDecl) {
        let fns: Vec<&UpdateFunction> = self.c.functions_for(&tx.name, TriggerKind::Insert).collect();
        let args = tx.schema.iter().map(|c| ident(&c.name)).collect::<Vec<_>>().join(", ");
        self.line("bool fired = false;");
        for f in &fns {
            self.line(&format!("if ({}({args})) fired = true;", f.name));
        }
        let mut heads: Vec<&str> = Vec::new();
        for f in &fns {
            let h = self.c.model.rule(&f.rule).expect("rule").head.relation.as_str();
            if !heads.contains(&h) {
                heads.push(h);
            }
        }
        for h in heads {
            if h == SEND {
                self.open("while (fired && sendPending.length > 0)");
                self.line("SendFact memory s = sendPending[sendPending.length - 1];");
                self.line("sendPending.pop();");
                self.line("(bool ok, ) = payable(s.to).call{value: s.amount}(\"\");");
                self.line("require(ok, \"send failed\");");
                self.close();
            } else if self.stored(h) {
                let d = self.decl(h);
                let fields = (0..d.arity()).map(|i| format!("e.{}", self.field(d, i))).collect::<Vec<_>>().join(", ");
                self.open(&format!("while ({h}Pending.length > 0)"));
                self.line(&format!("{}Fact memory e = {h}Pending[{h}Pending.length - 1];", upper(h)));
                self.line(&format!("{h}Pending.pop();"));
                self.line(&format!("event{}({fields});", upper(h)));
                self.close();
            }
        }
        if self.opts.instrument_violations && !self.c.violations().is_empty() {
            self.line("if (fired) checkViolations();");
        }
        self.line(&format!("if (fired) emit {}({args});", upper(tx.interface_name())));
    }

    fn entry_points(&mut self) {
        let bootstrap: Vec<&Rule> = {
            let mut v: Vec<&Rule> = self
                .c
                .model
                .rules
                .iter()
                .filter(|r| !r.is_transaction() && self.stored(&r.head.relation))
                .collect();
            v.sort_by_key(|r| (self.c.model.topo_rank(&r.head.relation), r.index));
            v
        };
        let ctor = self.c.model.constructor();
        let params = ctor
            .map(|d| d.schema.iter().map(|c| format!("{} {}", sol_ty(c.ty), ident(&c.name))).collect::<Vec<_>>().join(", "))
            .unwrap_or_default();
        self.open(&format!("constructor({params}) payable"));
        for r in &bootstrap {
            self.line(&format!("bootstrap_{}();", sanitize_id(&r.id)));
        }
        if let Some(d) = ctor {
            self.entry_body(d);
            self.line("require(fired, \"constructor rejected\");");
        }
        self.close();
        self.line("");

        for sig in self.c.interface.clone() {
            let params = sig.params.iter().map(|c| format!("{} {}", sol_ty(c.ty), ident(&c.name))).collect::<Vec<_>>().join(", ");
            match sig.kind {
                FunctionKind::Transaction => {
                    self.open(&format!("function {}({params}) public payable returns (bool)", sig.name));
                    let d = self.decl(&sig.relation);
                    self.entry_body(d);
                    self.line("return fired;");
                    self.close();
                }
                FunctionKind::View => {
                    let results =
                        sig.results.iter().map(|c| format!("{} {}", sol_ty(c.ty), ident(&c.name))).collect::<Vec<_>>().join(", ");
                    self.open(&format!("function {}({params}) public view returns ({results})", sig.name));
                    let d = self.decl(&sig.relation);
                    let keys: Vec<String> = sig.params.iter().map(|c| ident(&c.name)).collect();
                    let path = self.row_path(&d.name, &keys);
                    self.line(&format!("{}Tuple storage row = {path};", upper(&d.name)));
                    if d.non_key_columns().is_empty() {
                        self.line("return row.valid;");
                    } else {
                        let vals: Vec<String> = d.non_key_columns().iter().map(|&c| format!("row.{}", self.field(d, c))).collect();
                        self.line(&format!("return ({});", vals.join(", ")));
                    }
                    self.close();
                }
            }
            self.line("");
        }
        if self.opts.instrument_violations && !self.c.violations().is_empty() {
            self.open("function checkViolations() internal view");
            for v in self.c.violations().to_vec() {
                let d = self.decl(&v);
                self.open(&format!("if ({v}Count > 0)"));
                self.open(&format!("for (uint256 i = 0; i < {v}Keys.length; i++)"));
                self.line(&format!("{}Fact storage k = {v}Keys[i];", upper(&v)));
                let keys: Vec<String> = self.keys(d).iter().map(|&c| format!("k.{}", self.field(d, c))).collect();
                let path = self.row_path(&v, &keys);
                self.line(&format!("if ({path}.valid) revert(\"violation: {v}\");"));
                self.close();
                self.close();
            }
            self.close();
            self.line("");
        }
    }
}

impl Emitter<'_> {
    fn key_exprs(&self, d: &RelationDecl, prefix: &str) -> Vec<String> {
        self.keys(d).iter().map(|&k| format!("{prefix}{k}")).collect()
    }

    fn row_equals(&self, d: &RelationDecl, row: &str) -> String {
        let mut parts = vec![format!("{row}.valid")];
        for c in d.non_key_columns() {
            parts.push(format!("{row}.{} == c{c}", self.field(d, c)));
        }
        parts.join(" && ")
    }

    fn fact_ctor(&self, d: &RelationDecl, args: &[String]) -> String {
        format!("{}Fact({})", upper(&d.name), args.join(", "))
    }

    /// Calls every update function of `(rel, kind)` whose head is stored,
    /// optionally only the aggregate-triggered ones.
    fn call_functions(&mut self, d: &RelationDecl, kind: TriggerKind, only_aggregates: bool) {
        let args = self.col_args(d);
        let names: Vec<String> = self
            .c
            .functions_for(&d.name, kind)
            .filter(|f| !only_aggregates || f.via_aggregate)
            .filter(|f| self.stored(&self.c.model.rule(&f.rule).expect("rule").head.relation))
            .map(|f| f.name.clone())
            .collect();
        for n in names {
            self.line(&format!("{n}({args});"));
        }
    }

    fn dependent_heads(&self, d: &RelationDecl) -> Vec<String> {
        let mut heads = Vec::new();
        for f in self.c.functions_for(&d.name, TriggerKind::Delete) {
            let h = &self.c.model.rule(&f.rule).expect("rule").head.relation;
            if self.stored(h) && !heads.contains(h) {
                heads.push(h.clone());
            }
        }
        heads
    }

    fn drain_retractions(&mut self, heads: &[String]) {
        for h in heads {
            let hd = self.decl(h);
            let fields = (0..hd.arity()).map(|i| format!("p.{}", self.field(hd, i))).collect::<Vec<_>>().join(", ");
            self.open(&format!("while ({h}Pending.length > mark_{h})"));
            self.line(&format!("{}Fact memory p = {h}Pending[{h}Pending.length - 1];", upper(h)));
            self.line(&format!("{h}Pending.pop();"));
            self.line(&format!("retract{}({fields});", upper(h)));
            self.close();
        }
    }

    fn remove_from(&mut self, array: &str, d: &RelationDecl) {
        let cond: Vec<String> = self.keys(d).iter().map(|&k| format!("{array}[i].{} == c{k}", self.field(d, k))).collect();
        let cond = if cond.is_empty() { "true".to_string() } else { cond.join(" && ") };
        self.open(&format!("for (uint256 i = 0; i < {array}.length; i++)"));
        self.open(&format!("if ({cond})"));
        self.line(&format!("{array}[i] = {array}[{array}.length - 1];"));
        self.line(&format!("{array}.pop();"));
        self.line("break;");
        self.close();
        self.close();
    }

    fn cache_updates(&mut self, d: &RelationDecl, insert: bool) {
        for n in 0..self.c.agg_caches.len() {
            let spec = self.c.agg_caches[n].clone();
            if spec.relation != d.name {
                continue;
            }
            let path: String = std::iter::once(format!("cache{n}")).chain(spec.group_cols.iter().map(|g| format!("[c{g}]"))).collect();
            let groups = self.group_arrays.contains(&n);
            let key = format!("Cache{n}Key({})", spec.group_cols.iter().map(|g| format!("c{g}")).collect::<Vec<_>>().join(", "));
            let (size, value) = match spec.kind {
                AggCacheKind::Sum => (format!("{path}.rows"), spec.value_col.map(|v| format!("c{v}"))),
                AggCacheKind::Count => (path.clone(), None),
                AggCacheKind::Ordered => (format!("{path}.length"), spec.value_col.map(|v| format!("c{v}"))),
            };
            if insert {
                if groups {
                    self.line(&format!("if ({size} == 0) cache{n}Groups.push({key});"));
                }
                match spec.kind {
                    AggCacheKind::Sum => {
                        self.line(&format!("{path}.total += {};", value.expect("value")));
                        self.line(&format!("{path}.rows += 1;"));
                    }
                    AggCacheKind::Count => self.line(&format!("{path} += 1;")),
                    AggCacheKind::Ordered => {
                        let t = sol_ty(self.cache_value_type(n).expect("value"));
                        self.line(&format!("_sortedInsert_{t}({path}, {});", value.expect("value")));
                    }
                }
            } else {
                match spec.kind {
                    AggCacheKind::Sum => {
                        self.line(&format!("{path}.total -= {};", value.expect("value")));
                        self.line(&format!("{path}.rows -= 1;"));
                    }
                    AggCacheKind::Count => self.line(&format!("{path} -= 1;")),
                    AggCacheKind::Ordered => {
                        let t = sol_ty(self.cache_value_type(n).expect("value"));
                        self.line(&format!("_sortedRemove_{t}({path}, {});", value.expect("value")));
                    }
                }
                if groups {
                    self.open(&format!("if ({size} == 0)"));
                    let cond: Vec<String> =
                        spec.group_cols.iter().enumerate().map(|(i, g)| format!("cache{n}Groups[i].g{i} == c{g}")).collect();
                    let cond = if cond.is_empty() { "true".to_string() } else { cond.join(" && ") };
                    self.open(&format!("for (uint256 i = 0; i < cache{n}Groups.length; i++)"));
                    self.open(&format!("if ({cond})"));
                    self.line(&format!("cache{n}Groups[i] = cache{n}Groups[cache{n}Groups.length - 1];"));
                    self.line(&format!("cache{n}Groups.pop();"));
                    self.line("break;");
                    self.close();
                    self.close();
                    self.close();
                }
            }
        }
    }

    fn relation_helpers(&mut self, d: &RelationDecl) {
        let u = upper(&d.name);
        let params = self.col_params(d);
        let args = self.col_args(d);
        let keys = self.key_exprs(d, "c");
        let path = self.row_path(&d.name, &keys);
        let all: Vec<String> = (0..d.arity()).map(|i| format!("c{i}")).collect();
        let fact = self.fact_ctor(d, &all);
        let heads = self.dependent_heads(d);
        let evt = self.has_event_rows(&d.name);
        let view = if self.opts.emit_provenance_events { "" } else { " view" };

        // insert
        let evt_param = if evt { ", bool evt" } else { "" };
        self.open(&format!("function insert{u}({params}{evt_param}) internal"));
        for h in &heads {
            self.line(&format!("uint256 mark_{h} = {h}Pending.length;"));
        }
        self.call_functions(d, TriggerKind::Delete, true);
        self.line(&format!("{u}Tuple storage row = {path};"));
        for c in d.non_key_columns() {
            let f = format!("row.{} = c{c};", self.field(d, c));
            self.line(&f);
        }
        self.line("row.valid = true;");
        if evt {
            self.line("row.evt = evt;");
        }
        for j in self.c.join_indexes.iter().filter(|j| j.relation == d.name).cloned().collect::<Vec<_>>() {
            let ix: String = std::iter::once(self.index_name(&d.name, &j.constrained))
                .chain(j.constrained.iter().map(|k| format!("[c{k}]")))
                .collect();
            self.line(&format!("{ix}.push({fact});"));
        }
        if self.keys_arrays.contains(&d.name) {
            self.line(&format!("{}Keys.push({fact});", d.name));
        }
        if self.c.model.is_violation(&d.name) {
            self.line(&format!("{}Count += 1;", d.name));
        }
        self.cache_updates(d, true);
        self.drain_retractions(&heads);
        self.call_functions(d, TriggerKind::Insert, false);
        self.close();
        self.line("");

        // delete
        self.open(&format!("function delete{u}({params}) internal"));
        for h in &heads {
            self.line(&format!("uint256 mark_{h} = {h}Pending.length;"));
        }
        self.call_functions(d, TriggerKind::Delete, false);
        self.line(&format!("delete {path};"));
        for j in self.c.join_indexes.iter().filter(|j| j.relation == d.name).cloned().collect::<Vec<_>>() {
            let ix: String = std::iter::once(self.index_name(&d.name, &j.constrained))
                .chain(j.constrained.iter().map(|k| format!("[c{k}]")))
                .collect();
            self.remove_from(&ix, d);
        }
        if self.keys_arrays.contains(&d.name) {
            self.remove_from(&format!("{}Keys", d.name), d);
        }
        if self.c.model.is_violation(&d.name) {
            self.line(&format!("{}Count -= 1;", d.name));
        }
        self.cache_updates(d, false);
        self.drain_retractions(&heads);
        self.call_functions(d, TriggerKind::Insert, true);
        self.close();
        self.line("");

        let old_args: Vec<String> = (0..d.arity())
            .map(|i| if d.is_key(i) && d.kind != RelationKind::Singleton { format!("c{i}") } else { format!("row.{}", self.field(d, i)) })
            .collect();
        let evt_arg = |v: &str| if evt { format!(", {v}") } else { String::new() };

        // derivable
        self.open(&format!("function derivable{u}({params}) internal{view} returns (bool)"));
        if evt {
            self.line(&format!("{u}Tuple storage row = {path};"));
            let eq = self.row_equals(d, "row");
            self.line(&format!("if ({eq} && row.evt) return true;"));
        }
        let rules: Vec<String> =
            self.c.model.rules_deriving(&d.name).filter(|r| !r.is_transaction()).map(|r| sanitize_id(&r.id)).collect();
        for r in rules {
            self.line(&format!("if (rederive_{r}({args})) return true;"));
        }
        self.line("return false;");
        self.close();
        self.line("");

        // assert
        self.open(&format!("function assert{u}({params}) internal"));
        self.line(&format!("{u}Tuple storage row = {path};"));
        let eq = self.row_equals(d, "row");
        self.line(&format!("if ({eq}) return;"));
        self.line(&format!("if (!derivable{u}({args})) return;"));
        self.line(&format!("if (row.valid) delete{u}({});", old_args.join(", ")));
        self.line(&format!("insert{u}({args}{});", evt_arg("false")));
        self.close();
        self.line("");

        // retract
        self.open(&format!("function retract{u}({params}) internal"));
        self.line(&format!("{u}Tuple storage row = {path};"));
        self.line(&format!("if (!({eq})) return;"));
        self.line(&format!("if (derivable{u}({args})) return;"));
        self.line(&format!("delete{u}({args});"));
        self.close();
        self.line("");

        if evt {
            self.open(&format!("function event{u}({params}) internal"));
            self.line(&format!("{u}Tuple storage row = {path};"));
            self.open(&format!("if ({eq})"));
            self.line("row.evt = true;");
            self.line("return;");
            self.close();
            self.line(&format!("if (row.valid) delete{u}({});", old_args.join(", ")));
            self.line(&format!("insert{u}({args}, true);"));
            self.close();
            self.line("");
        }
    }

    fn sorted_helpers(&mut self) {
        for t in self.sorted_types.clone() {
            let t = sol_ty(t);
            self.open(&format!("function _sortedInsert_{t}({t}[] storage a, {t} v) internal"));
            self.line("a.push(v);");
            self.line("uint256 i = a.length - 1;");
            self.open("while (i > 0 && a[i - 1] > v)");
            self.line("a[i] = a[i - 1];");
            self.line("i--;");
            self.close();
            self.line("a[i] = v;");
            self.close();
            self.line("");
            self.open(&format!("function _sortedRemove_{t}({t}[] storage a, {t} v) internal"));
            self.open("for (uint256 i = 0; i < a.length; i++)");
            self.open("if (a[i] == v)");
            self.open("for (uint256 j = i; j + 1 < a.length; j++)");
            self.line("a[j] = a[j + 1];");
            self.close();
            self.line("a.pop();");
            self.line("return;");
            self.close();
            self.close();
            self.close();
            self.line("");
        }
    }
}

impl Emitter<'_> {
    fn seed(&mut self, rule: &Rule, seed: &Seed, on_fail: &str) {
        for (i, a) in seed.args.iter().enumerate() {
            match a {
                SeedArg::Bind(v) => {
                    let t = sol_ty(rule.var_types[v]);
                    self.line(&format!("{t} {} = c{i};", var(v)));
                }
                SeedArg::Equal(v) => self.line(&format!("if (c{i} != {}) {on_fail}", var(v))),
                SeedArg::Const(c) => self.line(&format!("if (c{i} != {}) {on_fail}", sol_const(c))),
                SeedArg::Ignore => {}
            }
        }
    }

    fn prov_read(&mut self, rule: &Rule, rel: &str, cols: &[String]) {
        if self.opts.emit_provenance_events {
            self.line(&format!("emit ProvRead(\"{}\", \"{rel}\", abi.encode({}));", rule.id, cols.join(", ")));
        }
    }

    fn terminal(&mut self, rule: &Rule, head: &TypedAtom, term: Terminal) {
        let args: Vec<String> = head.args.iter().map(arg).collect();
        let rel = &head.relation;
        if self.opts.emit_provenance_events && term != Terminal::ReturnTrue {
            self.line(&format!("emit ProvWrite(\"{}\", \"{rel}\", abi.encode({}));", rule.id, args.join(", ")));
        }
        match term {
            Terminal::ReturnTrue => self.line("return true;"),
            Terminal::Fire => {
                self.line("fired = true;");
                if rel == SEND {
                    self.line(&format!("sendPending.push(SendFact({}));", args.join(", ")));
                } else if self.stored(rel) {
                    let d = self.decl(rel);
                    let f = self.fact_ctor(d, &args);
                    self.line(&format!("{rel}Pending.push({f});"));
                }
            }
            _ if !self.stored(rel) => self.line(&format!("// {rel} is not stored")),
            Terminal::Assert => self.line(&format!("assert{}({});", upper(rel), args.join(", "))),
            Terminal::Retract => {
                let d = self.decl(rel);
                let f = self.fact_ctor(d, &args);
                self.line(&format!("{rel}Pending.push({f});"));
            }
        }
    }

    fn stmt(&mut self, rule: &Rule, s: &Stmt, term: Terminal) {
        match s {
            Stmt::Insert(h) | Stmt::Delete(h) => self.terminal(rule, h, term),
            Stmt::If { lhs, op, rhs, body, .. } => {
                self.open(&format!("if ({} {} {})", operand(lhs), op.symbol(), operand(rhs)));
                self.stmt(rule, body, term);
                self.close();
            }
            Stmt::Bind { var: v, value, body, .. } => {
                self.open("");
                self.line(&format!("{} {} = {};", sol_ty(rule.var_types[v]), var(v), operand(value)));
                self.stmt(rule, body, term);
                self.close();
            }
            Stmt::Assign { var: v, op, lhs, rhs, mode, body, .. } => {
                let e = format!("{} {} {}", operand(lhs), op.symbol(), operand(rhs));
                match mode {
                    AssignMode::Bind => {
                        self.open("");
                        self.line(&format!("{} {} = {e};", sol_ty(rule.var_types[v]), var(v)));
                    }
                    AssignMode::Check => self.open(&format!("if ({} == {e})", var(v))),
                }
                self.stmt(rule, body, term);
                self.close();
            }
            Stmt::Search { literal, relation, constraints, binds, same, first_only, body } => {
                self.search(rule, *literal, relation, constraints, binds, same, *first_only, body, term)
            }
            Stmt::AggAssign { literal, var: v, agg, cache, constraints, group_binds, empty_is_zero, mode, body, .. } => {
                let spec = self.c.agg_caches[*cache].clone();
                let target = sol_ty(rule.var_types[v]);
                let enumerate = !group_binds.is_empty();
                let group_expr = |col: usize| -> String {
                    if let Some((_, o)) = constraints.iter().find(|(c, _)| *c == col) {
                        operand(o)
                    } else {
                        let i = spec.group_cols.iter().position(|g| *g == col).expect("group column");
                        format!("g{literal}.g{i}")
                    }
                };
                if enumerate {
                    self.open(&format!("for (uint256 i{literal} = 0; i{literal} < cache{cache}Groups.length; i{literal}++)"));
                    self.line(&format!("Cache{cache}Key storage g{literal} = cache{cache}Groups[i{literal}];"));
                    for (c, o) in constraints {
                        let i = spec.group_cols.iter().position(|g| g == c).expect("group column");
                        self.line(&format!("if (g{literal}.g{i} != {}) continue;", operand(o)));
                    }
                    for (c, gv) in group_binds {
                        let i = spec.group_cols.iter().position(|g| g == c).expect("group column");
                        self.line(&format!("{} {} = g{literal}.g{i};", sol_ty(rule.var_types[gv]), var(gv)));
                    }
                } else {
                    self.open("");
                }
                let path: String =
                    std::iter::once(format!("cache{cache}")).chain(spec.group_cols.iter().map(|&g| format!("[{}]", group_expr(g)))).collect();
                let (nonempty, value) = match agg {
                    AggKind::Sum => (format!("{path}.rows > 0"), format!("{path}.total")),
                    AggKind::Count => (format!("{path} > 0"), format!("{target}({path})")),
                    AggKind::Max => (format!("{path}.length > 0"), format!("{path}[{path}.length - 1]")),
                    AggKind::Min => (format!("{path}.length > 0"), format!("{path}[0]")),
                };
                let guard = if *empty_is_zero && !enumerate { "true".to_string() } else { nonempty };
                match mode {
                    AssignMode::Bind => {
                        self.open(&format!("if ({guard})"));
                        self.line(&format!("{target} {} = {value};", var(v)));
                    }
                    AssignMode::Check => self.open(&format!("if ({guard} && {} == {value})", var(v))),
                }
                self.stmt(rule, body, term);
                self.close();
                self.close();
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &mut self,
        rule: &Rule,
        lit: usize,
        rel: &str,
        constraints: &[(usize, Operand)],
        binds: &[(usize, String)],
        same: &[(usize, usize)],
        first_only: bool,
        body: &Stmt,
        term: Terminal,
    ) {
        let d = self.decl(rel);
        if d.kind == RelationKind::Reserved {
            let value = match rel {
                MSG_SENDER => "msg.sender",
                MSG_VALUE => "msg.value",
                NOW => "block.timestamp",
                _ => unreachable!("read-only reserved relation"),
            };
            self.open("");
            for (_, o) in constraints {
                self.line(&format!("if ({value} == {}) {{", operand(o)));
                self.depth += 1;
            }
            for (_, v) in binds {
                self.line(&format!("{} {} = {value};", sol_ty(rule.var_types[v]), var(v)));
            }
            self.prov_read(rule, rel, &[value.to_string()]);
            self.stmt(rule, body, term);
            for _ in constraints {
                self.close();
            }
            self.close();
            return;
        }
        let u = upper(rel);
        let keys = self.keys(d);
        let fixed = |c: usize| constraints.iter().find(|(k, _)| *k == c).map(|(_, o)| operand(o));
        let all_fixed = keys.iter().all(|&k| fixed(k).is_some());
        let row = format!("r{lit}");
        let kf = format!("k{lit}");
        let looped = !all_fixed;
        // Column value expressions for the matched row.
        let col = |c: usize| -> String {
            if d.is_key(c) && d.kind != RelationKind::Singleton {
                if looped {
                    format!("{kf}.{}", ident(&d.schema[c].name))
                } else {
                    fixed(c).expect("fixed key")
                }
            } else {
                format!("{row}.{}", ident(&d.schema[c].name))
            }
        };
        if looped {
            let fixed_keys: Vec<usize> = keys.iter().copied().filter(|&k| fixed(k).is_some()).collect();
            let array = if !fixed_keys.is_empty() && self.has_index(rel, &fixed_keys) {
                std::iter::once(self.index_name(rel, &fixed_keys))
                    .chain(fixed_keys.iter().map(|&k| format!("[{}]", fixed(k).expect("fixed"))))
                    .collect()
            } else {
                format!("{rel}Keys")
            };
            self.open(&format!("for (uint256 i{lit} = 0; i{lit} < {array}.length; i{lit}++)"));
            self.line(&format!("{u}Fact storage {kf} = {array}[i{lit}];"));
            let key_exprs: Vec<String> = keys.iter().map(|&k| col(k)).collect();
            self.line(&format!("{u}Tuple storage {row} = {};", self.row_path(rel, &key_exprs)));
        } else {
            self.open("");
            let key_exprs: Vec<String> = keys.iter().map(|&k| fixed(k).expect("fixed")).collect();
            self.line(&format!("{u}Tuple storage {row} = {};", self.row_path(rel, &key_exprs)));
        }
        let mut cond = vec![format!("{row}.valid")];
        for (c, o) in constraints {
            if looped || !(d.is_key(*c) && d.kind != RelationKind::Singleton) {
                cond.push(format!("{} == {}", col(*c), operand(o)));
            }
        }
        for (a, b) in same {
            cond.push(format!("{} == {}", col(*a), col(*b)));
        }
        self.open(&format!("if ({})", cond.join(" && ")));
        for (c, v) in binds {
            self.line(&format!("{} {} = {};", sol_ty(rule.var_types[v]), var(v), col(*c)));
        }
        let cols: Vec<String> = (0..d.arity()).map(col).collect();
        self.prov_read(rule, rel, &cols);
        self.stmt(rule, body, term);
        if looped && first_only && !matches!(term, Terminal::ReturnTrue) {
            self.line("break;");
        }
        self.close();
        self.close();
    }

    fn update_function(&mut self, f: &UpdateFunction) {
        let rule = self.c.model.rule(&f.rule).expect("rule");
        let d = self.decl(&f.trigger.relation);
        let params = self.col_params(d);
        let tx = rule.is_transaction();
        let sig = if tx { " returns (bool fired)" } else { "" };
        self.line(&format!("// rule {}: {}", rule.id, crate::frontend::format_rule(&rule.source).trim_end()));
        self.open(&format!("function {}({params}) internal{sig}", f.name));
        let on_fail = if tx { "return false;" } else { "return;" };
        self.seed(rule, &f.seed, on_fail);
        let term = match (tx, f.trigger.kind) {
            (true, _) => Terminal::Fire,
            (false, TriggerKind::Insert) => Terminal::Assert,
            (false, TriggerKind::Delete) => Terminal::Retract,
        };
        self.stmt(rule, &f.body, term);
        self.close();
        self.line("");
    }

    fn rederive(&mut self, id: &str) {
        let plan = &self.c.rederive[id];
        let rule = self.c.model.rule(id).expect("rule");
        let d = self.decl(&rule.head.relation);
        let params = self.col_params(d);
        let view = if self.opts.emit_provenance_events { "" } else { " view" };
        self.open(&format!("function rederive_{}({params}) internal{view} returns (bool)", sanitize_id(id)));
        self.seed(rule, &plan.seed, "return false;");
        self.stmt(rule, &plan.body, Terminal::ReturnTrue);
        self.line("return false;");
        self.close();
        self.line("");
    }

    fn bootstrap(&mut self, id: &str) {
        let rule = self.c.model.rule(id).expect("rule");
        self.open(&format!("function bootstrap_{}() internal", sanitize_id(id)));
        self.stmt(rule, &self.c.full[id], Terminal::Assert);
        self.close();
        self.line("");
    }
}

fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '$')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
        && !KEYWORDS.contains(&name)
}

pub(super) fn emit(contract: &CompiledContract, options: &EmitOptions) -> Result<SolidityArtifact, EmitError> {
    if !valid_identifier(&options.contract_name) {
        return Err(EmitError::InvalidContractName(options.contract_name.clone()));
    }
    let mut e = Emitter {
        c: contract,
        opts: options,
        out: String::new(),
        depth: 0,
        keys_arrays: BTreeSet::new(),
        group_arrays: BTreeSet::new(),
        sorted_types: BTreeSet::new(),
    };
    e.analyse();
    e.line("// SPDX-License-Identifier: UNLICENSED");
    e.line(&format!("pragma solidity {};", options.pragma));
    e.line("");
    e.open(&format!("contract {}", options.contract_name));
    e.storage();
    e.events();
    e.entry_points();
    for d in e.stored_decls() {
        e.relation_helpers(d);
    }
    e.sorted_helpers();
    for f in &contract.functions {
        e.update_function(f);
    }
    for id in contract.rederive.keys() {
        e.rederive(id);
    }
    let mut boot: Vec<&Rule> = contract.model.rules.iter().filter(|r| !r.is_transaction() && e.stored(&r.head.relation)).collect();
    boot.sort_by_key(|r| (contract.model.topo_rank(&r.head.relation), r.index));
    for r in boot {
        e.bootstrap(&r.id);
    }
    // Drop the blank line before the closing brace.
    while e.out.ends_with("\n\n") {
        e.out.pop();
    }
    e.close();
    Ok(SolidityArtifact { source: e.out, interface: contract.interface.clone() })
}
