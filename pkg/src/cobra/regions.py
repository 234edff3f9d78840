"""Region tree construction over the control-flow graph.

Structural analysis repeatedly collapses recognized shapes into single
abstract nodes: loops first (self-loops and while-shaped bodies), then
straight-line sequences, then two- and three-node conditionals.  Anything
the patterns cannot reduce, typically the chained predicate blocks that
short-circuit conditions lower to, is wrapped in a black box found by a
single-entry single-exit cut on the postdominator tree.  Black boxes keep
their structured sub-regions as children but are opaque to rewriting.

Region names encode the kind and source span: ``B4`` a single statement,
``S2-7`` a sequence, ``L3-7`` a loop, ``C5-9`` a conditional, ``X5-9`` a
black box.  Loop and conditional spans end at the closing brace.

Every region is single-entry and single-exit: its entry block dominates all
blocks it covers and its successor postdominates them, which is what makes
replacing the region by any input/output-equivalent computation sound.
"""

from __future__ import annotations

from .cfg import Cfg, build_cfg, liveness, visible

EXIT = -2   # sentinel successor for "function exit" in the abstract graph


class Region:
    _next = [0]

    def __init__(self, kind, children=(), *, start_line=0, end_line=0,
                 block_id=None, stmt=None, stmts=(), is_run=False,
                 entry_block=None, succ_block=None, blocks=frozenset(),
                 loop_kind=None, loop_var=None, loop_source=None, role=None):
        self.rid = Region._next[0]
        Region._next[0] += 1
        self.kind = kind              # block | sequential | conditional | loop | blackbox
        self.children = list(children)
        self.start_line = start_line
        self.end_line = end_line
        self.block_id = block_id      # leaf: owning CFG block
        self.stmt = stmt              # leaf: source stmt; loop/cond: header stmt
        self.stmts = list(stmts)      # blackbox: covered source statements
        self.is_run = is_run          # sequence of statements from one CFG block
        self.entry_block = entry_block
        self.succ_block = succ_block  # block reached on exit; None = function exit
        self.blocks = frozenset(blocks)
        self.loop_kind = loop_kind    # query | coll | while
        self.loop_var = loop_var
        self.loop_source = loop_source
        self.role = role              # header | then | else for conditional children

    @property
    def name(self) -> str:
        tag = {"block": "B", "sequential": "S", "conditional": "C",
               "loop": "L", "blackbox": "X"}[self.kind]
        if self.kind == "block" or self.start_line == self.end_line:
            return f"{tag}{self.start_line}"
        return f"{tag}{self.start_line}-{self.end_line}"

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def find(self, name: str):
        for r in self.walk():
            if r.name == name:
                return r
        return None

    def __repr__(self):
        return f"<Region {self.name} {self.kind}>"


# ---------------------------------------------------------------------------
# leaf expansion: one region per source statement inside a straight-line block

def _leaf_region(cfg: Cfg, bid: int, succ) -> Region:
    b = cfg.blocks[bid]
    groups = []
    for t in b.tacs:
        if groups and groups[-1][0] is t.stmt:
            groups[-1][1].append(t)
        else:
            groups.append((t.stmt, [t]))
    if len(groups) <= 1:
        line = groups[0][1][0].line if groups else b.line
        stmt = groups[0][0] if groups else None
        return Region("block", start_line=line, end_line=line, block_id=bid,
                      stmt=stmt, stmts=[stmt] if stmt else [],
                      entry_block=bid, succ_block=succ, blocks={bid})
    kids = []
    for stmt, tacs in groups:
        line = tacs[0].line
        kids.append(Region("block", start_line=line, end_line=line, block_id=bid,
                           stmt=stmt, stmts=[stmt], entry_block=bid, blocks={bid}))
    return Region("sequential", kids, start_line=kids[0].start_line,
                  end_line=kids[-1].end_line, is_run=True, entry_block=bid,
                  succ_block=succ, blocks={bid},
                  stmts=[g[0] for g in groups])


# ---------------------------------------------------------------------------
# abstract reduction graph

class _ANode:
    __slots__ = ("nid", "bid", "region", "succs", "line", "kind", "payload", "stmt")

    def __init__(self, nid, bid, succs, line, kind, payload, stmt):
        self.nid = nid
        self.bid = bid          # entry CFG block of whatever this node holds
        self.region = None      # set once reduced past the leaf stage
        self.succs = succs      # ordered list of node ids / EXIT
        self.line = line
        self.kind = kind        # CFG block kind for unreduced leaves, else "region"
        self.payload = payload
        self.stmt = stmt


class _Analyzer:
    def __init__(self, cfg: Cfg):
        self.cfg = cfg
        self.nodes: dict[int, _ANode] = {}
        self.next_nid = 0
        self._build()

    def _build(self):
        cfg = self.cfg
        by_bid = {}
        order = sorted((b.line, b.bid) for b in cfg.body_blocks())
        for _, bid in order:
            b = cfg.blocks[bid]
            n = _ANode(self.next_nid, bid, [], b.line, b.kind, b.payload,
                       b.tacs[0].stmt if b.tacs else None)
            self.next_nid += 1
            self.nodes[n.nid] = n
            by_bid[bid] = n.nid
        for n in list(self.nodes.values()):
            b = cfg.blocks[n.bid]
            for s in b.succs:
                n.succs.append(EXIT if s == cfg.exit_id else by_bid[s])

    # -- helpers ---------------------------------------------------------

    def preds(self, nid):
        return [n.nid for n in self.ordered() if nid in n.succs]

    def ordered(self):
        return sorted(self.nodes.values(), key=lambda n: (n.line, n.nid))

    def succ_block(self, target) -> int | None:
        if target == EXIT:
            return None
        return self.nodes[target].bid

    def region_of(self, nid) -> Region:
        n = self.nodes[nid]
        if n.region is not None:
            return n.region
        succ = self.succ_block(n.succs[0]) if len(n.succs) == 1 else None
        if n.kind in ("loop_header", "pred", "pred_chain"):
            line = n.line
            stmt = n.payload[3] if n.kind == "loop_header" else n.payload[1]
            return Region("block", start_line=line, end_line=line, block_id=n.bid,
                          stmt=stmt, stmts=[stmt], entry_block=n.bid,
                          succ_block=succ, blocks={n.bid})
        return _leaf_region(self.cfg, n.bid, succ)

    def replace(self, member_ids, region: Region, succs):
        """Collapse ``member_ids`` into one node holding ``region``."""
        keep = min(member_ids)
        for nid in member_ids:
            if nid != keep:
                del self.nodes[nid]
        n = self.nodes[keep]
        n.region = region
        n.bid = region.entry_block
        n.succs = list(succs)
        n.kind = "region"
        n.line = region.start_line
        member = set(member_ids)
        for other in self.nodes.values():
            if other is n:
                continue
            out, seen = [], set()
            for s in other.succs:
                s2 = keep if s in member else s
                if s2 not in seen:
                    seen.add(s2)
                    out.append(s2)
            other.succs = out
        out, seen = [], set()
        for s in n.succs:
            s2 = keep if s in member else s
            if s2 not in seen:
                seen.add(s2)
                out.append(s2)
        n.succs = out

    # -- patterns --------------------------------------------------------

    def try_loops(self) -> bool:
        for n in self.ordered():
            if n.nid in n.succs:                      # self loop
                if n.kind != "loop_header":
                    continue
                body = [s for s in n.succs if s != n.nid]
                hdr = self.region_of(n.nid)
                end = n.payload[3].end_line
                succ = self.succ_block(body[0]) if body else None
                r = Region("loop", [hdr], start_line=n.line, end_line=end,
                           entry_block=n.bid, succ_block=succ, blocks={n.bid},
                           stmt=n.payload[3], loop_kind=n.payload[0],
                           loop_var=n.payload[1], loop_source=n.payload[2])
                hdr.succ_block = n.bid
                self.replace([n.nid], r, body)
                return True
            if n.kind != "loop_header" or len(n.succs) != 2:
                continue
            b_id, x_id = n.succs
            if b_id in (n.nid, EXIT):
                b_id, x_id = x_id, b_id
            if b_id in (n.nid, EXIT) or x_id == b_id:
                continue
            b = self.nodes[b_id]
            if self.preds(b_id) != [n.nid]:
                continue
            if b.succs != [n.nid]:
                continue
            hdr = self.region_of(n.nid)
            body = self.region_of(b_id)
            hdr.succ_block = body.entry_block
            body.succ_block = n.bid
            end = n.payload[3].end_line
            r = Region("loop", [hdr, body], start_line=n.line, end_line=end,
                       entry_block=n.bid, succ_block=self.succ_block(x_id),
                       blocks=hdr.blocks | body.blocks,
                       stmt=n.payload[3], loop_kind=n.payload[0],
                       loop_var=n.payload[1], loop_source=n.payload[2])
            self.replace([n.nid, b_id], r, [x_id])
            return True
        return False

    def try_sequences(self) -> bool:
        for n in self.ordered():
            if len(n.succs) != 1 or n.succs[0] == n.nid or n.succs[0] == EXIT:
                continue
            chain = [n.nid]
            cur = n.nid
            while True:
                nxt = self.nodes[cur].succs[0]
                if nxt == EXIT or nxt in chain:
                    break
                if self.preds(nxt) != [cur]:
                    break
                nn = self.nodes[nxt]
                if len(nn.succs) != 1 or nn.succs[0] == nxt:
                    break       # branch nodes never join a sequence
                chain.append(nxt)
                cur = nxt
            while True:   # extend backward so chains are maximal
                ps = self.preds(chain[0])
                if len(ps) != 1 or ps[0] in chain:
                    break
                p = self.nodes[ps[0]]
                if len(p.succs) != 1 or p.succs[0] != chain[0]:
                    break
                chain.insert(0, ps[0])
            if len(chain) < 2:
                continue
            if set(self.preds(chain[0])) & set(chain):    # would close a cycle
                continue
            kids = [self.region_of(nid) for nid in chain]
            for i in range(len(kids) - 1):
                kids[i].succ_block = kids[i + 1].entry_block
            last = self.nodes[chain[-1]]
            succs = list(last.succs)
            kids[-1].succ_block = self.succ_block(succs[0]) if len(succs) == 1 else None
            blocks = frozenset().union(*(k.blocks for k in kids))
            r = Region("sequential", kids, start_line=kids[0].start_line,
                       end_line=kids[-1].end_line, entry_block=kids[0].entry_block,
                       succ_block=kids[-1].succ_block, blocks=blocks)
            self.replace(chain, r, succs)
            return True
        return False

    def _inside(self, nid, stmt) -> bool:
        """True when the node's entry block was lowered inside ``stmt``."""
        path = self.cfg.blocks[self.nodes[nid].bid].owner_path
        return any(s is stmt for s in path)

    def try_conds(self) -> bool:
        for n in self.ordered():
            if n.kind != "pred" or len(n.succs) != 2:
                continue
            t_id, e_id = n.succs
            if t_id == EXIT or n.nid in (t_id, e_id) or t_id == e_id:
                continue
            t = self.nodes[t_id]
            stmt = n.payload[1]
            if not self._inside(t_id, stmt):
                continue
            # if-then: true branch rejoins at the false target
            if self.preds(t_id) == [n.nid] and t.succs == [e_id]:
                hdr = self.region_of(n.nid)
                then = self.region_of(t_id)
                hdr.succ_block = then.entry_block
                hdr.role = "header"
                then.role = "then"
                then.succ_block = self.succ_block(e_id)
                r = Region("conditional", [hdr, then], start_line=n.line,
                           end_line=stmt.end_line, stmt=stmt,
                           entry_block=n.bid, succ_block=self.succ_block(e_id),
                           blocks=hdr.blocks | then.blocks)
                self.replace([n.nid, t_id], r, [e_id])
                return True
            if e_id == EXIT or not self._inside(e_id, stmt):
                continue
            e = self.nodes[e_id]
            # if-then-else: both branches single-pred with the same single succ
            if self.preds(t_id) == [n.nid] and self.preds(e_id) == [n.nid] \
                    and len(t.succs) == 1 and t.succs == e.succs \
                    and t.succs[0] not in (t_id, e_id, n.nid):
                j = t.succs[0]
                hdr = self.region_of(n.nid)
                then = self.region_of(t_id)
                els = self.region_of(e_id)
                hdr.succ_block = then.entry_block
                hdr.role, then.role, els.role = "header", "then", "else"
                then.succ_block = self.succ_block(j)
                els.succ_block = self.succ_block(j)
                r = Region("conditional", [hdr, then, els], start_line=n.line,
                           end_line=stmt.end_line, stmt=stmt,
                           entry_block=n.bid, succ_block=self.succ_block(j),
                           blocks=hdr.blocks | then.blocks | els.blocks)
                self.replace([n.nid, t_id, e_id], r, [j])
                return True
        return False

    # -- improper fallback ----------------------------------------------

    def _postdoms(self):
        ids = list(self.nodes) + [EXIT]
        rev = {i: [] for i in ids}
        for n in self.nodes.values():
            for s in n.succs:
                rev[n.nid].append(s)
        # postdominators: forward problem on reversed edges from EXIT
        pd = {i: set(ids) for i in ids}
        pd[EXIT] = {EXIT}
        changed = True
        while changed:
            changed = False
            for i in ids:
                if i == EXIT:
                    continue
                succs = self.nodes[i].succs
                if not succs:
                    new = {i}
                else:
                    new = set(ids)
                    for s in succs:
                        new &= pd[s]
                    new |= {i}
                if new != pd[i]:
                    pd[i] = new
                    changed = True
        return pd

    def _ipostdom(self, pd, i):
        # the nearest postdominator is the candidate all others postdominate
        cands = pd[i] - {i}
        for c in cands:
            if all(o in pd[c] for o in cands):
                return c
        return EXIT

    def try_improper(self) -> bool:
        pd = self._postdoms()
        # predicate blocks seed the cut; loop headers only as a last resort,
        # so loops around an unstructured conditional still reduce normally
        tiers = ([n for n in self.ordered() if n.kind in ("pred_chain", "pred")],
                 [n for n in self.ordered() if len(n.succs) >= 2])
        best = None
        for tier in tiers:
            for n in tier:
                if len(n.succs) < 2:
                    continue
                j = self._ipostdom(pd, n.nid)
                members = self._between(n.nid, j)
                if members is None or len(members) < 2:
                    continue
                best = (n, members, j)
                break
            if best is not None:
                break
        if best is None:
            return False
        n, members, j = best
        kids = sorted((self.nodes[m] for m in members),
                      key=lambda x: (x.line, x.nid))
        regions = [self.region_of(k.nid) for k in kids]
        stmts = _outer_stmts(self.cfg, regions)
        blocks = frozenset().union(*(r.blocks for r in regions))
        start = min(r.start_line for r in regions)
        end = max(r.end_line for r in regions)
        for s in stmts:
            end = max(end, getattr(s, "end_line", getattr(s, "line", end)))
        r = Region("blackbox", regions, start_line=start, end_line=end,
                   stmts=stmts, entry_block=n.bid,
                   succ_block=self.succ_block(j), blocks=blocks)
        self.replace(sorted(members), r, [j])
        return True

    def _between(self, c, j):
        """Nodes reachable from c without passing through j; None unless the
        set has the single-entry single-exit shape."""
        seen = {c}
        work = [c]
        while work:
            cur = work.pop()
            for s in self.nodes[cur].succs:
                if s == j or s in seen:
                    continue
                if s == EXIT:
                    return None
                seen.add(s)
                work.append(s)
        for m in seen:
            if m != c and any(p not in seen for p in self.preds(m)):
                return None
            for s in self.nodes[m].succs:
                if s != j and s not in seen:
                    return None
        return seen

    def run(self) -> Region:
        while True:
            if len(self.nodes) == 1:
                n = next(iter(self.nodes.values()))
                if len(n.succs) <= 1 and (not n.succs or n.succs[0] == EXIT):
                    root = self.region_of(n.nid)
                    root.succ_block = None
                    return root
            if self.try_loops():
                continue
            if self.try_sequences():
                continue
            if self.try_conds():
                continue
            if self.try_improper():
                continue
            # nothing reduced: wrap everything that's left
            all_ids = [n.nid for n in self.ordered()]
            kids = [self.region_of(nid) for nid in all_ids]
            stmts = _outer_stmts(self.cfg, kids)
            blocks = frozenset().union(*(r.blocks for r in kids))
            root = Region("blackbox", kids,
                          start_line=min(r.start_line for r in kids),
                          end_line=max(r.end_line for r in kids),
                          stmts=stmts, entry_block=kids[0].entry_block,
                          succ_block=None, blocks=blocks)
            self.replace(all_ids, root, [EXIT])
            return root


def _outer_stmts(cfg: Cfg, regions) -> list:
    """Outermost source statements fully covered by the given regions, for
    opaque re-emission.  Uses the enclosing-statement paths recorded per
    block, compounds that extend beyond the covered blocks are skipped in
    favour of deeper statements."""
    blocks = set().union(*(r.blocks for r in regions))
    coverage: dict[int, set] = {}
    for b2 in cfg.blocks.values():
        for s in b2.owner_path:
            coverage.setdefault(id(s), set()).add(b2.bid)
        for t in b2.tacs:
            if t.stmt is not None:
                coverage.setdefault(id(t.stmt), set()).add(b2.bid)
    out = []

    def add(s):
        if all(s is not x for x in out):
            out.append(s)

    for bid in sorted(blocks, key=lambda b: (cfg.blocks[b].line, b)):
        b = cfg.blocks[bid]
        cand = None
        for s in b.owner_path:      # outermost first
            if coverage[id(s)] <= blocks:
                cand = s
                break
        if cand is not None:
            add(cand)
            continue
        for t in b.tacs:            # leaf statements of the block itself
            if t.stmt is not None:
                add(t.stmt)
    out.sort(key=lambda s: s.line)
    return out


# ---------------------------------------------------------------------------
# public entry points

class RegionInfo:
    """Region tree plus the analyses later stages need."""

    def __init__(self, fn, cfg: Cfg, root: Region, live: dict, seed: frozenset):
        self.fn = fn
        self.cfg = cfg
        self.root = root
        self.live = live
        self.seed = seed

    def boundary(self, region: Region):
        return live_boundary(region, self.cfg, self.live, self.seed)


def build_regions(fn, filename: str = "<input>") -> RegionInfo:
    cfg = build_cfg(fn, filename)
    root = _Analyzer(cfg).run()
    _set_parents(root, None)
    seed = frozenset(p.name for p in fn.params)
    live = liveness(cfg, set(seed))
    return RegionInfo(fn, cfg, root, live, seed)


def _set_parents(r: Region, parent):
    r.parent = parent
    for c in r.children:
        _set_parents(c, r)


def live_boundary(region: Region, cfg: Cfg, live: dict, seed) -> tuple:
    """(inputs, outputs): variables live on entry to the region and variables
    the rest of the program reads after it."""
    inputs = visible(live[region.entry_block][0])
    if region.succ_block is None:
        outputs = visible(set(seed))
    else:
        outputs = visible(live[region.succ_block][0])
    return inputs, outputs


def dump(region: Region) -> str:
    """One-line nested summary; straight-line runs print as bare names."""
    if region.kind == "block" or (region.kind == "sequential" and region.is_run):
        return region.name
    inner = "; ".join(dump(c) for c in region.children)
    return f"{region.name} {{ {inner} }}"


def dump_expanded(region: Region, indent: str = "") -> str:
    """Multi-line dump that also expands runs to their statements."""
    if region.kind == "block":
        return f"{indent}{region.name}"
    lines = [f"{indent}{region.name} {{"]
    for c in region.children:
        lines.append(dump_expanded(c, indent + "  "))
    lines.append(f"{indent}}}")
    return "\n".join(lines)
