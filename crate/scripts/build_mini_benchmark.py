#!/usr/bin/env python3
"""Writes benchmarks/mini: manifest.jsonl, diagram sources and mutants.jsonl.

Render the diagrams afterwards with
    diagbench render-diagram -i benchmarks/mini/diagrams/N.mmd -o benchmarks/mini/diagrams/N.png
(scripts/build_mini_benchmark.sh does both).
"""
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent / "benchmarks" / "mini"

DIAGRAMS = {
    1: """classDiagram
class BoundedStack {
  -capacity int
  -items list
  +BoundedStack(capacity)
  +push(x) bool  false and unchanged when full
  +pop() value  removes top, empty marker when empty
  +peek() value  top without removing, empty marker when empty
  +size() int
}
""",
    2: """flowchart TD
    Start(["leftmost index of target in sorted xs"]) --> Init["lo = 0, hi = length of xs"]
    Init --> Loop{"lo < hi ?"}
    Loop -- "yes" --> Mid["mid = floor of (lo + hi) / 2"]
    Mid --> Cmp{"xs[mid] < target ?"}
    Cmp -- "yes" --> Right["lo = mid + 1"]
    Cmp -- "no" --> Left["hi = mid"]
    Right --> Loop
    Left --> Loop
    Loop -- "no" --> Found{"lo < length and xs[lo] == target ?"}
    Found -- "yes" --> RetLo(["return lo"])
    Found -- "no" --> RetMiss(["return -1"])
""",
    3: """sequenceDiagram
participant C as Caller
participant B as EventBus
participant H as Handlers
C->>B: subscribe(event, handler)
B-->>C: id, 1 for the first subscription then 2, 3 ...
C->>B: publish(event, payload)
loop every subscription for event, oldest first
B->>H: handler(payload)
end
B-->>C: number of handlers called
C->>B: unsubscribe(id)
alt id is subscribed
B-->>C: true, subscription removed
else unknown or already removed
B-->>C: false
end
""",
    4: """flowchart LR
    G(["GREEN lasts 3 ticks"]) -- "after 3 ticks" --> Y(["YELLOW lasts 1 tick"])
    Y -- "after 1 tick" --> R(["RED lasts 2 ticks"])
    R -- "after 2 ticks" --> G
    S(("new light")) --> G
""",
}

CONCEPTS = {
    1: ("ClassDesign", "Easy"),
    2: ("Algorithm", "Easy"),
    3: ("BehavioralPattern", "Medium"),
    4: ("Simulation", "Medium"),
}

PY = {
    1: dict(
        prompt="Implement the Python class `BoundedStack` shown in the class diagram. The constructor takes the capacity. How each method behaves on a full or empty stack is detailed in the provided diagram; use `None` as the empty marker.",
        solution="""class BoundedStack:
    def __init__(self, capacity):
        self.capacity = capacity
        self.items = []

    def push(self, x):
        if len(self.items) >= self.capacity:
            return False
        self.items.append(x)
        return True

    def pop(self):
        if not self.items:
            return None
        return self.items.pop()

    def peek(self):
        return self.items[-1] if self.items else None

    def size(self):
        return len(self.items)
""",
        tests=[
            "s = BoundedStack(2); assert s.push(1) and s.push(2)",
            "s = BoundedStack(1); s.push(1); assert s.push(2) is False",
            "s = BoundedStack(3); s.push(4); s.push(5); assert s.peek() == 5 and s.size() == 2",
            "s = BoundedStack(3); s.push(7); assert s.pop() == 7 and s.pop() is None",
            "assert BoundedStack(2).peek() is None",
            "s = BoundedStack(2); s.push(1); s.push(2); s.push(3); assert s.size() == 2 and s.peek() == 2",
        ],
    ),
    2: dict(
        prompt="Write a Python function `leftmost_index(xs, target)` for a list `xs` sorted in ascending order. The search procedure and the value returned when `target` is absent could be found in the diagram.",
        solution="""def leftmost_index(xs, target):
    lo, hi = 0, len(xs)
    while lo < hi:
        mid = (lo + hi) // 2
        if xs[mid] < target:
            lo = mid + 1
        else:
            hi = mid
    if lo < len(xs) and xs[lo] == target:
        return lo
    return -1
""",
        tests=[
            "assert leftmost_index([1, 2, 2, 2, 3], 2) == 1",
            "assert leftmost_index([1, 3, 5], 4) == -1",
            "assert leftmost_index([], 1) == -1",
            "assert leftmost_index([5], 5) == 0",
            "assert leftmost_index([1, 1, 1], 1) == 0",
            "assert leftmost_index([1, 2, 3, 4, 5, 6], 6) == 5",
            "assert leftmost_index([2, 4], 1) == -1",
        ],
    ),
    3: dict(
        prompt="Implement a Python class `EventBus` with `subscribe(event, handler)`, `unsubscribe(id)` and `publish(event, payload)`. Handlers are callables taking the payload. The return values and the notification order are detailed in the provided diagram.",
        solution="""class EventBus:
    def __init__(self):
        self.next_id = 1
        self.subs = []

    def subscribe(self, event, handler):
        sid = self.next_id
        self.next_id += 1
        self.subs.append((sid, event, handler))
        return sid

    def unsubscribe(self, sid):
        for i, (s, _, _) in enumerate(self.subs):
            if s == sid:
                del self.subs[i]
                return True
        return False

    def publish(self, event, payload):
        count = 0
        for _, e, h in list(self.subs):
            if e == event:
                h(payload)
                count += 1
        return count
""",
        tests=[
            "b = EventBus(); assert b.subscribe('a', print) == 1 and b.subscribe('b', print) == 2",
            "b = EventBus(); seen = []; b.subscribe('x', seen.append); assert b.publish('x', 5) == 1 and seen == [5]",
            "b = EventBus(); log = []; b.subscribe('e', lambda p: log.append(('first', p))); b.subscribe('e', lambda p: log.append(('second', p))); b.publish('e', 1); assert log == [('first', 1), ('second', 1)]",
            "b = EventBus(); sid = b.subscribe('e', lambda p: None); assert b.unsubscribe(sid) is True and b.unsubscribe(sid) is False",
            "b = EventBus(); assert b.publish('none', 0) == 0",
            "b = EventBus(); got = []; b.subscribe('a', got.append); b.subscribe('b', got.append); b.publish('b', 9); assert got == [9]",
            "b = EventBus(); got = []; s = b.subscribe('a', got.append); b.unsubscribe(s); assert b.publish('a', 1) == 0 and got == []",
        ],
    ),
    4: dict(
        prompt="Implement a Python class `TrafficLight` with `tick()` advancing time by one tick and `state()` returning the current colour as an upper-case string. The starting colour, the cycle and how long each colour lasts are detailed in the provided diagram.",
        solution="""class TrafficLight:
    DURATIONS = {"GREEN": 3, "YELLOW": 1, "RED": 2}
    NEXT = {"GREEN": "YELLOW", "YELLOW": "RED", "RED": "GREEN"}

    def __init__(self):
        self.current = "GREEN"
        self.elapsed = 0

    def tick(self):
        self.elapsed += 1
        if self.elapsed >= self.DURATIONS[self.current]:
            self.current = self.NEXT[self.current]
            self.elapsed = 0

    def state(self):
        return self.current
""",
        tests=[
            "t = TrafficLight(); assert t.state() == 'GREEN'",
            "t = TrafficLight(); [t.tick() for _ in range(2)]; assert t.state() == 'GREEN'",
            "t = TrafficLight(); [t.tick() for _ in range(3)]; assert t.state() == 'YELLOW'",
            "t = TrafficLight(); [t.tick() for _ in range(4)]; assert t.state() == 'RED'",
            "t = TrafficLight(); [t.tick() for _ in range(6)]; assert t.state() == 'GREEN'",
            "t = TrafficLight(); [t.tick() for _ in range(9)]; assert t.state() == 'YELLOW'",
        ],
    ),
}

CPP = {
    1: dict(
        prompt="Implement the C++ class `BoundedStack` of `int` values shown in the class diagram, with an `explicit BoundedStack(int capacity)` constructor, `bool push(int)`, `int pop()`, `int peek() const` and `int size() const`. How each method behaves on a full or empty stack is detailed in the provided diagram; use `-1` as the empty marker.",
        solution="""#include <vector>

class BoundedStack {
public:
    explicit BoundedStack(int capacity) : capacity_(capacity) {}

    bool push(int x) {
        if (static_cast<int>(items_.size()) >= capacity_) return false;
        items_.push_back(x);
        return true;
    }

    int pop() {
        if (items_.empty()) return -1;
        int v = items_.back();
        items_.pop_back();
        return v;
    }

    int peek() const { return items_.empty() ? -1 : items_.back(); }

    int size() const { return static_cast<int>(items_.size()); }

private:
    int capacity_;
    std::vector<int> items_;
};
""",
        tests=[
            "    { BoundedStack s(2); assert(s.push(1) && s.push(2)); }",
            "    { BoundedStack s(1); s.push(1); assert(!s.push(2)); }",
            "    { BoundedStack s(3); s.push(4); s.push(5); assert(s.peek() == 5 && s.size() == 2); }",
            "    { BoundedStack s(3); s.push(7); assert(s.pop() == 7 && s.pop() == -1); }",
            "    { BoundedStack s(2); assert(s.peek() == -1); }",
            "    { BoundedStack s(2); s.push(1); s.push(2); s.push(3); assert(s.size() == 2 && s.peek() == 2); }",
        ],
    ),
    2: dict(
        prompt="Write a C++ function `int leftmost_index(const std::vector<int>& xs, int target)` for a vector sorted in ascending order. The search procedure and the value returned when `target` is absent could be found in the diagram.",
        solution="""#include <vector>

int leftmost_index(const std::vector<int>& xs, int target) {
    int lo = 0;
    int hi = static_cast<int>(xs.size());
    while (lo < hi) {
        int mid = (lo + hi) / 2;
        if (xs[mid] < target) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    if (lo < static_cast<int>(xs.size()) && xs[lo] == target) return lo;
    return -1;
}
""",
        tests=[
            "    assert(leftmost_index({1, 2, 2, 2, 3}, 2) == 1);",
            "    assert(leftmost_index({1, 3, 5}, 4) == -1);",
            "    assert(leftmost_index({}, 1) == -1);",
            "    assert(leftmost_index({5}, 5) == 0);",
            "    assert(leftmost_index({1, 1, 1}, 1) == 0);",
            "    assert(leftmost_index({1, 2, 3, 4, 5, 6}, 6) == 5);",
            "    assert(leftmost_index({2, 4}, 1) == -1);",
        ],
    ),
    3: dict(
        prompt="Implement a C++ class `EventBus` with `int subscribe(const std::string& event, std::function<void(int)> handler)`, `bool unsubscribe(int id)` and `int publish(const std::string& event, int payload)`. The return values and the notification order are detailed in the provided diagram.",
        solution="""#include <functional>
#include <string>
#include <utility>
#include <vector>

class EventBus {
public:
    int subscribe(const std::string& event, std::function<void(int)> handler) {
        int id = next_id_++;
        subs_.push_back({id, event, std::move(handler)});
        return id;
    }

    bool unsubscribe(int id) {
        for (auto it = subs_.begin(); it != subs_.end(); ++it) {
            if (it->id == id) {
                subs_.erase(it);
                return true;
            }
        }
        return false;
    }

    int publish(const std::string& event, int payload) {
        std::vector<Sub> snapshot = subs_;
        int count = 0;
        for (auto& s : snapshot) {
            if (s.event == event) {
                s.handler(payload);
                ++count;
            }
        }
        return count;
    }

private:
    struct Sub {
        int id;
        std::string event;
        std::function<void(int)> handler;
    };
    int next_id_ = 1;
    std::vector<Sub> subs_;
};
""",
        tests=[
            "    { EventBus b; assert(b.subscribe(\"a\", [](int) {}) == 1 && b.subscribe(\"b\", [](int) {}) == 2); }",
            "    { EventBus b; std::vector<int> seen; b.subscribe(\"x\", [&](int p) { seen.push_back(p); }); assert(b.publish(\"x\", 5) == 1 && seen == std::vector<int>{5}); }",
            "    { EventBus b; std::vector<int> log; b.subscribe(\"e\", [&](int p) { log.push_back(10 + p); }); b.subscribe(\"e\", [&](int p) { log.push_back(20 + p); }); b.publish(\"e\", 1); assert((log == std::vector<int>{11, 21})); }",
            "    { EventBus b; int id = b.subscribe(\"e\", [](int) {}); assert(b.unsubscribe(id) && !b.unsubscribe(id)); }",
            "    { EventBus b; assert(b.publish(\"none\", 0) == 0); }",
            "    { EventBus b; std::vector<int> got; b.subscribe(\"a\", [&](int p) { got.push_back(p); }); b.subscribe(\"b\", [&](int p) { got.push_back(p); }); b.publish(\"b\", 9); assert(got == std::vector<int>{9}); }",
            "    { EventBus b; std::vector<int> got; int id = b.subscribe(\"a\", [&](int p) { got.push_back(p); }); b.unsubscribe(id); assert(b.publish(\"a\", 1) == 0 && got.empty()); }",
        ],
    ),
    4: dict(
        prompt="Implement a C++ class `TrafficLight` with `void tick()` advancing time by one tick and `std::string state() const` returning the current colour as an upper-case string. The starting colour, the cycle and how long each colour lasts are detailed in the provided diagram.",
        solution="""#include <string>

class TrafficLight {
public:
    void tick() {
        ++elapsed_;
        if (elapsed_ >= duration()) {
            phase_ = (phase_ + 1) % 3;
            elapsed_ = 0;
        }
    }

    std::string state() const {
        static const char* names[] = {"GREEN", "YELLOW", "RED"};
        return names[phase_];
    }

private:
    int duration() const {
        static const int ticks[] = {3, 1, 2};
        return ticks[phase_];
    }
    int phase_ = 0;
    int elapsed_ = 0;
};
""",
        tests=[
            "    { TrafficLight t; assert(t.state() == \"GREEN\"); }",
            "    { TrafficLight t; for (int i = 0; i < 2; ++i) t.tick(); assert(t.state() == \"GREEN\"); }",
            "    { TrafficLight t; for (int i = 0; i < 3; ++i) t.tick(); assert(t.state() == \"YELLOW\"); }",
            "    { TrafficLight t; for (int i = 0; i < 4; ++i) t.tick(); assert(t.state() == \"RED\"); }",
            "    { TrafficLight t; for (int i = 0; i < 6; ++i) t.tick(); assert(t.state() == \"GREEN\"); }",
            "    { TrafficLight t; for (int i = 0; i < 9; ++i) t.tick(); assert(t.state() == \"YELLOW\"); }",
        ],
    ),
}

JS = {
    1: dict(
        prompt="Implement the JavaScript class `BoundedStack` shown in the class diagram. The constructor takes the capacity. How each method behaves on a full or empty stack is detailed in the provided diagram; use `null` as the empty marker.",
        solution="""class BoundedStack {
  constructor(capacity) {
    this.capacity = capacity;
    this.items = [];
  }

  push(x) {
    if (this.items.length >= this.capacity) return false;
    this.items.push(x);
    return true;
  }

  pop() {
    return this.items.length ? this.items.pop() : null;
  }

  peek() {
    return this.items.length ? this.items[this.items.length - 1] : null;
  }

  size() {
    return this.items.length;
  }
}
""",
        tests=[
            "{ const s = new BoundedStack(2); assert.ok(s.push(1) && s.push(2)); }",
            "{ const s = new BoundedStack(1); s.push(1); assert.strictEqual(s.push(2), false); }",
            "{ const s = new BoundedStack(3); s.push(4); s.push(5); assert.strictEqual(s.peek(), 5); assert.strictEqual(s.size(), 2); }",
            "{ const s = new BoundedStack(3); s.push(7); assert.strictEqual(s.pop(), 7); assert.strictEqual(s.pop(), null); }",
            "assert.strictEqual(new BoundedStack(2).peek(), null);",
            "{ const s = new BoundedStack(2); s.push(1); s.push(2); s.push(3); assert.strictEqual(s.size(), 2); assert.strictEqual(s.peek(), 2); }",
        ],
    ),
    2: dict(
        prompt="Write a JavaScript function `leftmostIndex(xs, target)` for an array sorted in ascending order. The search procedure and the value returned when `target` is absent could be found in the diagram.",
        solution="""function leftmostIndex(xs, target) {
  let lo = 0;
  let hi = xs.length;
  while (lo < hi) {
    const mid = Math.floor((lo + hi) / 2);
    if (xs[mid] < target) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo < xs.length && xs[lo] === target) return lo;
  return -1;
}
""",
        tests=[
            "assert.strictEqual(leftmostIndex([1, 2, 2, 2, 3], 2), 1);",
            "assert.strictEqual(leftmostIndex([1, 3, 5], 4), -1);",
            "assert.strictEqual(leftmostIndex([], 1), -1);",
            "assert.strictEqual(leftmostIndex([5], 5), 0);",
            "assert.strictEqual(leftmostIndex([1, 1, 1], 1), 0);",
            "assert.strictEqual(leftmostIndex([1, 2, 3, 4, 5, 6], 6), 5);",
            "assert.strictEqual(leftmostIndex([2, 4], 1), -1);",
        ],
    ),
    3: dict(
        prompt="Implement a JavaScript class `EventBus` with `subscribe(event, handler)`, `unsubscribe(id)` and `publish(event, payload)`. Handlers are functions taking the payload. The return values and the notification order are detailed in the provided diagram.",
        solution="""class EventBus {
  constructor() {
    this.nextId = 1;
    this.subs = [];
  }

  subscribe(event, handler) {
    const id = this.nextId++;
    this.subs.push({ id, event, handler });
    return id;
  }

  unsubscribe(id) {
    const i = this.subs.findIndex((s) => s.id === id);
    if (i < 0) return false;
    this.subs.splice(i, 1);
    return true;
  }

  publish(event, payload) {
    let count = 0;
    for (const s of [...this.subs]) {
      if (s.event === event) {
        s.handler(payload);
        count++;
      }
    }
    return count;
  }
}
""",
        tests=[
            "{ const b = new EventBus(); assert.strictEqual(b.subscribe('a', () => {}), 1); assert.strictEqual(b.subscribe('b', () => {}), 2); }",
            "{ const b = new EventBus(); const seen = []; b.subscribe('x', (p) => seen.push(p)); assert.strictEqual(b.publish('x', 5), 1); assert.deepStrictEqual(seen, [5]); }",
            "{ const b = new EventBus(); const log = []; b.subscribe('e', (p) => log.push(['first', p])); b.subscribe('e', (p) => log.push(['second', p])); b.publish('e', 1); assert.deepStrictEqual(log, [['first', 1], ['second', 1]]); }",
            "{ const b = new EventBus(); const id = b.subscribe('e', () => {}); assert.strictEqual(b.unsubscribe(id), true); assert.strictEqual(b.unsubscribe(id), false); }",
            "assert.strictEqual(new EventBus().publish('none', 0), 0);",
            "{ const b = new EventBus(); const got = []; b.subscribe('a', (p) => got.push(p)); b.subscribe('b', (p) => got.push(p)); b.publish('b', 9); assert.deepStrictEqual(got, [9]); }",
            "{ const b = new EventBus(); const got = []; const id = b.subscribe('a', (p) => got.push(p)); b.unsubscribe(id); assert.strictEqual(b.publish('a', 1), 0); assert.deepStrictEqual(got, []); }",
        ],
    ),
    4: dict(
        prompt="Implement a JavaScript class `TrafficLight` with `tick()` advancing time by one tick and `state()` returning the current colour as an upper-case string. The starting colour, the cycle and how long each colour lasts are detailed in the provided diagram.",
        solution="""const DURATIONS = { GREEN: 3, YELLOW: 1, RED: 2 };
const NEXT = { GREEN: 'YELLOW', YELLOW: 'RED', RED: 'GREEN' };

class TrafficLight {
  constructor() {
    this.current = 'GREEN';
    this.elapsed = 0;
  }

  tick() {
    this.elapsed++;
    if (this.elapsed >= DURATIONS[this.current]) {
      this.current = NEXT[this.current];
      this.elapsed = 0;
    }
  }

  state() {
    return this.current;
  }
}
""",
        tests=[
            "assert.strictEqual(new TrafficLight().state(), 'GREEN');",
            "{ const t = new TrafficLight(); for (let i = 0; i < 2; i++) t.tick(); assert.strictEqual(t.state(), 'GREEN'); }",
            "{ const t = new TrafficLight(); for (let i = 0; i < 3; i++) t.tick(); assert.strictEqual(t.state(), 'YELLOW'); }",
            "{ const t = new TrafficLight(); for (let i = 0; i < 4; i++) t.tick(); assert.strictEqual(t.state(), 'RED'); }",
            "{ const t = new TrafficLight(); for (let i = 0; i < 6; i++) t.tick(); assert.strictEqual(t.state(), 'GREEN'); }",
            "{ const t = new TrafficLight(); for (let i = 0; i < 9; i++) t.tick(); assert.strictEqual(t.state(), 'YELLOW'); }",
        ],
    ),
}

LANGS = [("python", "appended-assertions", PY), ("cpp", "main-driver", CPP), ("javascript", "appended-assertions", JS)]

# Single-token mutants of canonical solutions; each must fail at least one test.
MUTANTS = [
    ("python", 1, "len(self.items) >= self.capacity", "len(self.items) > self.capacity"),
    ("python", 2, "xs[mid] < target", "xs[mid] <= target"),
    ("python", 3, "count += 1", "count += 2"),
    ("python", 4, '"GREEN": 3', '"GREEN": 2'),
    ("cpp", 1, "if (items_.empty()) return -1;", "if (items_.empty()) return 0;"),
    ("cpp", 2, "return -1;", "return 0;"),
    ("cpp", 3, "int next_id_ = 1;", "int next_id_ = 0;"),
    ("cpp", 4, "elapsed_ >= duration()", "elapsed_ > duration()"),
    ("javascript", 1, "this.items.length >= this.capacity", "this.items.length > this.capacity"),
    ("javascript", 2, "lo = mid + 1", "lo = mid - 1"),
    ("javascript", 3, "if (s.event === event)", "if (s.event !== event)"),
    ("javascript", 4, "YELLOW: 1", "YELLOW: 2"),
]


def main():
    (ROOT / "diagrams").mkdir(parents=True, exist_ok=True)
    for cid, text in DIAGRAMS.items():
        (ROOT / "diagrams" / f"{cid}.mmd").write_text(text)
    lines = [json.dumps({"manifest_version": "1"})]
    for lang, harness, table in LANGS:
        for cid, (category, difficulty) in CONCEPTS.items():
            p = table[cid]
            lines.append(json.dumps({
                "concept_id": cid,
                "language": lang,
                "prompt": p["prompt"],
                "diagram_path": f"diagrams/{cid}.png",
                "solution": p["solution"],
                "tests": p["tests"],
                "harness_kind": harness,
                "category": category,
                "difficulty": difficulty,
            }))
    (ROOT / "manifest.jsonl").write_text("\n".join(lines) + "\n")
    mutants = []
    for lang, cid, find, replace in MUTANTS:
        solution = {"python": PY, "cpp": CPP, "javascript": JS}[lang][cid]["solution"]
        assert solution.count(find) == 1, (lang, cid, find)
        mutants.append(json.dumps({"concept_id": cid, "language": lang, "find": find, "replace": replace}))
    (ROOT / "mutants.jsonl").write_text("\n".join(mutants) + "\n")


if __name__ == "__main__":
    main()
