"""hyperq: exact counting of trace sets matching a temporal template.

The package decides properties of the shape

    forall p1 .. pk .  guard  ->  (count s : {a, ...} . body) <= n

over finite state-transition models: for every tuple of traces named by the
universal variables that satisfies the guard, the number of distinct
projections (onto the counted proposition set) of traces satisfying the body
must respect the comparison against the bound.

Modules:
    formula   -- temporal formula AST, desugaring, negation normal form
    frontend  -- concrete syntax for properties and models
    kripke    -- state-transition models and ultimately periodic traces
    automata  -- alternating/nondeterministic automata pipeline
    counting  -- projected model counting and the infinity test
    satenc    -- bounded propositional encoding and enumerative solving
    oracle    -- brute-force semantics used for cross-validation
    cli       -- command line entry points
"""

__version__ = "0.1.0"
