//! A deterministic 20 Questions environment.
//!
//! A hidden keyword is drawn from a corpus; a guesser asks yes/no/maybe
//! questions and may guess the keyword, winning if a guess matches within 20
//! turns. Everything here is scripted and seeded, so memory policies can be
//! compared on accuracy without a language model in the loop.
//!
//! The crucial wiring: the guesser never sees the raw game history, only the
//! context string its [`ContextProvider`] assembles. A memory-backed provider
//! exposes whatever the session's store currently retains; truncated
//! baselines expose a sliding window. Lossier context means weaker candidate
//! filtering, which is what makes memory effects measurable.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::embedding::SEP;
use crate::error::{Error, Result};
use crate::hash::SplitMix64;
use crate::session::{Session, Turn};

pub const MAX_TURNS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentAnswer {
    Yes,
    No,
    Maybe,
}

impl AgentAnswer {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentAnswer::Yes => "yes",
            AgentAnswer::No => "no",
            AgentAnswer::Maybe => "maybe",
        }
    }

    pub fn parse(s: &str) -> Option<AgentAnswer> {
        match s {
            "yes" => Some(AgentAnswer::Yes),
            "no" => Some(AgentAnswer::No),
            "maybe" => Some(AgentAnswer::Maybe),
            _ => None,
        }
    }
}

impl std::fmt::Display for AgentAnswer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One corpus entry: a guessable keyword with its category and attribute
/// table. The table is total over the corpus's attribute vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub text: String,
    pub category: String,
    pub attributes: BTreeMap<String, AgentAnswer>,
}

/// The keyword corpus plus its derived attribute vocabulary (sorted, which
/// fixes the deterministic tie order for question selection).
#[derive(Debug, Clone)]
pub struct Corpus {
    keywords: Vec<Keyword>,
    attributes: Vec<String>,
}

/// Lowercases and strips punctuation: non-alphanumeric characters become
/// separators and runs of whitespace collapse.
pub fn normalize_text(s: &str) -> String {
    let lowered = s.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for part in lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|p| !p.is_empty())
    {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(part);
    }
    out
}

fn strip_article(s: &str) -> &str {
    for prefix in ["a ", "an ", "the "] {
        if let Some(rest) = s.strip_prefix(prefix) {
            return rest;
        }
    }
    s
}

/// Canonical guess form: lowercase, punctuation-stripped, leading article
/// removed.
pub fn normalize_guess(s: &str) -> String {
    strip_article(&normalize_text(s)).to_string()
}

/// The canonical question wording for an attribute.
pub fn question_for_attribute(attribute: &str) -> String {
    format!("is it {attribute}?")
}

/// The canonical question wording for a keyword guess.
pub fn question_for_guess(keyword: &str) -> String {
    format!("is it {keyword}?")
}

/// Resolves a question against a keyword's attribute table: the normalized
/// question must be exactly "is it {attribute}". Anything unresolvable
/// answers maybe.
pub fn resolve_question(keyword: &Keyword, question: &str) -> AgentAnswer {
    let normalized = normalize_text(question);
    match normalized.strip_prefix("is it ") {
        Some(body) => keyword
            .attributes
            .get(body)
            .copied()
            .unwrap_or(AgentAnswer::Maybe),
        None => AgentAnswer::Maybe,
    }
}

impl Corpus {
    pub fn new(keywords: Vec<Keyword>) -> Result<Self> {
        let mut vocabulary: BTreeSet<String> = BTreeSet::new();
        for kw in &keywords {
            vocabulary.extend(kw.attributes.keys().cloned());
        }
        let corpus = Corpus {
            keywords,
            attributes: vocabulary.into_iter().collect(),
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let keywords: Vec<Keyword> = serde_json::from_str(json)?;
        Corpus::new(keywords)
    }

    /// The corpus bundled with the crate: 100 keywords in 10 categories over
    /// a 30-attribute vocabulary.
    pub fn builtin() -> &'static Corpus {
        static BUILTIN: OnceLock<Corpus> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            Corpus::from_json(include_str!("../data/corpus.json"))
                .expect("bundled corpus is valid")
        })
    }

    /// Structural lint. Each keyword must cover the whole attribute
    /// vocabulary, names must be stable under normalization, attribute
    /// signatures must be globally unique (so every keyword is reachable by
    /// questioning alone), and no keyword may read like an attribute
    /// question.
    pub fn validate(&self) -> Result<()> {
        if self.keywords.is_empty() {
            return Err(Error::contract("corpus must contain at least one keyword"));
        }
        for attr in &self.attributes {
            if normalize_text(attr) != *attr {
                return Err(Error::contract(format!(
                    "attribute {attr:?} is not normalization-stable"
                )));
            }
        }
        let attribute_forms: BTreeSet<&str> = self
            .attributes
            .iter()
            .map(|a| strip_article(a))
            .collect();
        let mut names = BTreeSet::new();
        let mut signatures: BTreeMap<Vec<AgentAnswer>, &str> = BTreeMap::new();
        for kw in &self.keywords {
            if normalize_text(&kw.text) != kw.text {
                return Err(Error::contract(format!(
                    "keyword {:?} is not normalization-stable",
                    kw.text
                )));
            }
            if kw.category.is_empty() {
                return Err(Error::contract(format!(
                    "keyword {:?} has an empty category",
                    kw.text
                )));
            }
            if !names.insert(normalize_guess(&kw.text)) {
                return Err(Error::contract(format!(
                    "duplicate keyword {:?}",
                    kw.text
                )));
            }
            if attribute_forms.contains(normalize_guess(&kw.text).as_str()) {
                return Err(Error::contract(format!(
                    "keyword {:?} collides with an attribute phrasing",
                    kw.text
                )));
            }
            if kw.attributes.len() != self.attributes.len()
                || !self.attributes.iter().all(|a| kw.attributes.contains_key(a))
            {
                return Err(Error::contract(format!(
                    "keyword {:?} does not cover the attribute vocabulary",
                    kw.text
                )));
            }
            let signature: Vec<AgentAnswer> = self
                .attributes
                .iter()
                .map(|a| kw.attributes[a])
                .collect();
            if let Some(other) = signatures.insert(signature, &kw.text) {
                return Err(Error::contract(format!(
                    "keywords {:?} and {:?} share an attribute signature",
                    other, kw.text
                )));
            }
        }
        Ok(())
    }

    pub fn keywords(&self) -> &[Keyword] {
        &self.keywords
    }

    /// Attribute vocabulary in canonical (sorted) order.
    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    pub fn categories(&self) -> BTreeSet<&str> {
        self.keywords.iter().map(|k| k.category.as_str()).collect()
    }

    fn has_attribute(&self, name: &str) -> bool {
        self.attributes.binary_search_by(|a| a.as_str().cmp(name)).is_ok()
    }

    fn find_keyword(&self, normalized: &str) -> Option<&Keyword> {
        self.keywords
            .iter()
            .find(|k| normalize_guess(&k.text) == normalized)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameStatus {
    InProgress,
    Success,
    Failure,
}

/// One completed exchange as the environment records it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub turn: usize,
    pub question: String,
    pub answer: AgentAnswer,
    pub guess: Option<String>,
}

/// A live match. The keyword is exposed on the type for answerers and
/// post-game logging; match runners must not leak it to the guesser.
#[derive(Debug, Clone)]
pub struct GameState {
    keyword: Keyword,
    turn: usize,
    history: Vec<MatchRecord>,
    status: GameStatus,
}

impl GameState {
    /// Starts a match with a seed-determined keyword.
    pub fn new_game(corpus: &Corpus, seed: u64) -> Result<GameState> {
        if corpus.is_empty() {
            return Err(Error::contract("cannot start a game on an empty corpus"));
        }
        let mut rng = SplitMix64::new(seed);
        let index = rng.next_below(corpus.len() as u64) as usize;
        Ok(GameState {
            keyword: corpus.keywords()[index].clone(),
            turn: 1,
            history: Vec::new(),
            status: GameStatus::InProgress,
        })
    }

    pub fn keyword(&self) -> &Keyword {
        &self.keyword
    }

    /// 1-based number of the turn about to be played.
    pub fn turn(&self) -> usize {
        self.turn
    }

    pub fn status(&self) -> GameStatus {
        self.status
    }

    pub fn history(&self) -> &[MatchRecord] {
        &self.history
    }

    /// Plays one exchange, answering from the keyword's attribute table.
    pub fn step(&mut self, question: &str, guess: Option<&str>) -> Result<AgentAnswer> {
        let answer = resolve_question(&self.keyword, question);
        self.step_with_answer(question, answer, guess)?;
        Ok(answer)
    }

    /// Plays one exchange with an externally supplied answer (used when an
    /// answerer agent stands in for the table lookup).
    pub fn step_with_answer(
        &mut self,
        question: &str,
        answer: AgentAnswer,
        guess: Option<&str>,
    ) -> Result<()> {
        if self.status != GameStatus::InProgress {
            return Err(Error::contract("cannot step a finished game"));
        }
        self.history.push(MatchRecord {
            turn: self.turn,
            question: question.to_string(),
            answer,
            guess: guess.map(|g| g.to_string()),
        });
        let correct = guess
            .map(|g| normalize_guess(g) == normalize_guess(&self.keyword.text))
            .unwrap_or(false);
        if correct {
            self.status = GameStatus::Success;
        } else if self.turn >= MAX_TURNS {
            self.status = GameStatus::Failure;
        } else {
            self.turn += 1;
        }
        Ok(())
    }
}

/// A guesser's move for one turn.
#[derive(Debug, Clone, PartialEq)]
pub struct GuesserMove {
    pub question: String,
    pub guess: Option<String>,
}

/// Question-asking agent. Receives only the turn number and the visible
/// context string; everything it knows about the match must come from there
/// (or its own internal state).
pub trait Guesser {
    fn next_move(&mut self, turn: usize, context: &str) -> Result<GuesserMove>;
}

/// Question-answering agent.
pub trait Answerer {
    fn answer(&mut self, keyword: &Keyword, question: &str) -> Result<AgentAnswer>;
}

/// The honest default answerer: a pure attribute-table lookup.
#[derive(Debug, Default)]
pub struct TableAnswerer;

impl Answerer for TableAnswerer {
    fn answer(&mut self, keyword: &Keyword, question: &str) -> Result<AgentAnswer> {
        Ok(resolve_question(keyword, question))
    }
}

/// Facts recoverable from a visible context string.
#[derive(Debug, Default, Clone, PartialEq)]
struct ParsedFacts {
    category: Option<String>,
    facts: BTreeMap<String, AgentAnswer>,
    refuted: BTreeSet<String>,
}

/// Extracts category, answered attributes, and refuted guesses from context
/// lines. Unanswered question echoes contribute nothing; a guess-form
/// question in past context implies the match continued, i.e. the guess was
/// wrong.
fn parse_context(corpus: &Corpus, context: &str) -> ParsedFacts {
    let mut parsed = ParsedFacts::default();
    for raw in context.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("category: ") {
            parsed.category = Some(rest.trim().to_string());
            continue;
        }
        let Some(qmark) = line.rfind('?') else {
            continue;
        };
        let question_part = &line[..qmark];
        let suffix = normalize_text(&line[qmark + 1..]);
        let answer = AgentAnswer::parse(&suffix);
        let normalized = normalize_text(question_part);
        let Some(body) = normalized.strip_prefix("is it ") else {
            continue;
        };
        if corpus.has_attribute(body) {
            if let Some(ans) = answer {
                parsed.facts.insert(body.to_string(), ans);
            }
        } else {
            let guess_form = strip_article(body);
            if corpus.find_keyword(guess_form).is_some() && answer != Some(AgentAnswer::Yes) {
                parsed.refuted.insert(guess_form.to_string());
            }
        }
    }
    parsed
}

/// Keywords consistent with every parsed fact, in corpus order.
fn filter_candidates<'c>(corpus: &'c Corpus, facts: &ParsedFacts) -> Vec<&'c Keyword> {
    corpus
        .keywords()
        .iter()
        .filter(|kw| {
            if let Some(cat) = &facts.category {
                if kw.category != *cat {
                    return false;
                }
            }
            if facts.refuted.contains(normalize_guess(&kw.text).as_str()) {
                return false;
            }
            facts
                .facts
                .iter()
                .all(|(attr, ans)| kw.attributes.get(attr) == Some(ans))
        })
        .collect()
}

/// Deterministic binary-search-style guesser. Filters the corpus down to the
/// candidates consistent with the facts visible in its context, then asks the
/// attribute that most evenly splits them; guesses once one candidate
/// remains, when nothing splits, or on the final turn.
///
/// It keeps no memory of its own past questions: if an answered attribute
/// falls out of the visible context, the candidates re-diversify on it and
/// the guesser will naturally re-ask.
#[derive(Debug, Clone)]
pub struct ScriptedGuesser<'c> {
    corpus: &'c Corpus,
}

impl<'c> ScriptedGuesser<'c> {
    pub fn new(corpus: &'c Corpus) -> Self {
        ScriptedGuesser { corpus }
    }

    /// Consistency score used by the contradictory-context fallback: how many
    /// visible facts the keyword satisfies.
    fn agreement(kw: &Keyword, facts: &ParsedFacts) -> usize {
        let mut score = 0;
        if let Some(cat) = &facts.category {
            if kw.category == *cat {
                score += 1;
            }
        }
        score
            + facts
                .facts
                .iter()
                .filter(|(attr, ans)| kw.attributes.get(*attr) == Some(ans))
                .count()
    }

    fn best_split_attribute(&self, candidates: &[&Keyword]) -> Option<String> {
        let mut best: Option<(&str, usize)> = None;
        for attr in self.corpus.attributes() {
            let mut counts = [0usize; 3];
            for kw in candidates {
                match kw.attributes[attr] {
                    AgentAnswer::Yes => counts[0] += 1,
                    AgentAnswer::No => counts[1] += 1,
                    AgentAnswer::Maybe => counts[2] += 1,
                }
            }
            let largest = *counts.iter().max().expect("three buckets");
            if largest == candidates.len() {
                continue;
            }
            match best {
                Some((_, score)) if largest >= score => {}
                _ => best = Some((attr, largest)),
            }
        }
        best.map(|(attr, _)| attr.to_string())
    }

    fn guess_move(keyword_text: &str) -> GuesserMove {
        GuesserMove {
            question: question_for_guess(keyword_text),
            guess: Some(keyword_text.to_string()),
        }
    }
}

impl Guesser for ScriptedGuesser<'_> {
    fn next_move(&mut self, turn: usize, context: &str) -> Result<GuesserMove> {
        let facts = parse_context(self.corpus, context);
        let candidates = filter_candidates(self.corpus, &facts);
        if candidates.is_empty() {
            // Contradictory visible context: guess the keyword agreeing with
            // the most facts, skipping already-refuted ones.
            let fallback = self
                .corpus
                .keywords()
                .iter()
                .filter(|kw| !facts.refuted.contains(normalize_guess(&kw.text).as_str()))
                .max_by(|a, b| {
                    Self::agreement(a, &facts).cmp(&Self::agreement(b, &facts))
                })
                .unwrap_or(&self.corpus.keywords()[0]);
            return Ok(Self::guess_move(&fallback.text));
        }
        if candidates.len() == 1 || turn >= MAX_TURNS {
            return Ok(Self::guess_move(&candidates[0].text));
        }
        match self.best_split_attribute(&candidates) {
            Some(attr) => Ok(GuesserMove {
                question: question_for_attribute(&attr),
                guess: None,
            }),
            None => Ok(Self::guess_move(&candidates[0].text)),
        }
    }
}

/// Context-blind agent: asks seed-random attribute questions and guesses a
/// fresh seed-random keyword every turn, never repeating a guess within a
/// match.
#[derive(Debug, Clone)]
pub struct RandomGuesser<'c> {
    corpus: &'c Corpus,
    rng: SplitMix64,
    guessed: BTreeSet<usize>,
}

impl<'c> RandomGuesser<'c> {
    pub fn new(corpus: &'c Corpus, seed: u64) -> Self {
        RandomGuesser {
            corpus,
            rng: SplitMix64::new(seed),
            guessed: BTreeSet::new(),
        }
    }
}

impl Guesser for RandomGuesser<'_> {
    fn next_move(&mut self, _turn: usize, _context: &str) -> Result<GuesserMove> {
        let attrs = self.corpus.attributes();
        let attr = &attrs[self.rng.next_below(attrs.len() as u64) as usize];
        let total = self.corpus.len();
        let mut index = self.rng.next_below(total as u64) as usize;
        if self.guessed.len() < total {
            while self.guessed.contains(&index) {
                index = self.rng.next_below(total as u64) as usize;
            }
        }
        self.guessed.insert(index);
        let guess = self.corpus.keywords()[index].text.clone();
        Ok(GuesserMove {
            question: question_for_attribute(attr),
            guess: Some(guess),
        })
    }
}

/// Upper-bound agent that already knows the keyword.
#[derive(Debug, Clone)]
pub struct OracleGuesser {
    keyword: String,
}

impl OracleGuesser {
    pub fn new(keyword: impl Into<String>) -> Self {
        OracleGuesser {
            keyword: keyword.into(),
        }
    }
}

impl Guesser for OracleGuesser {
    fn next_move(&mut self, _turn: usize, _context: &str) -> Result<GuesserMove> {
        Ok(GuesserMove {
            question: question_for_guess(&self.keyword),
            guess: Some(self.keyword.clone()),
        })
    }
}

/// Assembles the guesser-visible context each turn and records completed
/// exchanges, producing one transcript [`Turn`] per exchange for the arm
/// being played.
pub trait ContextProvider {
    /// The context for the current turn. Always ends with the current hint
    /// (the category on turn 1, the previous exchange afterwards).
    fn context(&mut self, hint: &str) -> String;

    /// Records a completed exchange. `response` is the guesser's output line.
    fn commit(&mut self, index: u64, hint: &str, response: &str) -> Result<Turn>;
}

fn baseline_turn(index: u64, hint: &str, response: &str, state_bytes: u64, started: Instant) -> Turn {
    Turn {
        index,
        query: hint.to_string(),
        retrieved: None,
        response: response.to_string(),
        inserted_slot: None,
        pruned: None,
        latency_ms: started.elapsed().as_secs_f64() * 1000.0,
        store_bytes: state_bytes,
    }
}

/// Baseline arm that retains nothing: context is the current hint alone.
#[derive(Debug, Default)]
pub struct StatelessProvider;

impl ContextProvider for StatelessProvider {
    fn context(&mut self, hint: &str) -> String {
        hint.to_string()
    }

    fn commit(&mut self, index: u64, hint: &str, response: &str) -> Result<Turn> {
        let started = Instant::now();
        Ok(baseline_turn(index, hint, response, hint.len() as u64, started))
    }
}

/// Baseline arm that retains the last `k` raw exchanges.
#[derive(Debug)]
pub struct RollingProvider {
    k: usize,
    buffer: VecDeque<(String, String)>,
}

impl RollingProvider {
    pub fn new(k: usize) -> Self {
        RollingProvider {
            k,
            buffer: VecDeque::new(),
        }
    }

    fn buffered_bytes(&self) -> u64 {
        self.buffer
            .iter()
            .map(|(h, r)| h.len() as u64 + r.len() as u64 + 2)
            .sum()
    }
}

impl ContextProvider for RollingProvider {
    fn context(&mut self, hint: &str) -> String {
        let mut lines = Vec::with_capacity(self.buffer.len() * 2 + 1);
        for (h, r) in &self.buffer {
            lines.push(h.as_str());
            lines.push(r.as_str());
        }
        lines.push(hint);
        lines.join("\n")
    }

    fn commit(&mut self, index: u64, hint: &str, response: &str) -> Result<Turn> {
        let started = Instant::now();
        self.buffer.push_back((hint.to_string(), response.to_string()));
        while self.buffer.len() > self.k {
            self.buffer.pop_front();
        }
        Ok(baseline_turn(index, hint, response, self.buffered_bytes(), started))
    }
}

/// Upper-bound arm that retains every exchange verbatim.
#[derive(Debug, Default)]
pub struct FullHistoryProvider {
    lines: Vec<(String, String)>,
}

impl ContextProvider for FullHistoryProvider {
    fn context(&mut self, hint: &str) -> String {
        let mut lines = Vec::with_capacity(self.lines.len() * 2 + 1);
        for (h, r) in &self.lines {
            lines.push(h.as_str());
            lines.push(r.as_str());
        }
        lines.push(hint);
        lines.join("\n")
    }

    fn commit(&mut self, index: u64, hint: &str, response: &str) -> Result<Turn> {
        let started = Instant::now();
        self.lines.push((hint.to_string(), response.to_string()));
        let bytes = self
            .lines
            .iter()
            .map(|(h, r)| h.len() as u64 + r.len() as u64 + 2)
            .sum();
        Ok(baseline_turn(index, hint, response, bytes, started))
    }
}

/// Memory-augmented arm: the context is whatever the session's store
/// currently retains (each slot shown as its query and response lines), and
/// every exchange passes through the full turn loop, so retrieval stamps,
/// query-window updates, and pruning all shape what survives.
pub struct MemoryProvider {
    session: Session,
}

impl MemoryProvider {
    pub fn new(session: Session) -> Self {
        MemoryProvider { session }
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn into_session(self) -> Session {
        self.session
    }
}

impl ContextProvider for MemoryProvider {
    fn context(&mut self, hint: &str) -> String {
        let mut lines = Vec::with_capacity(self.session.store().len() * 2 + 1);
        let mut rendered = String::new();
        for slot in self.session.store().slots() {
            rendered.clear();
            rendered.push_str(&slot.text);
            for line in rendered.replace(SEP, "\n").lines() {
                lines.push(line.to_string());
            }
        }
        lines.push(hint.to_string());
        lines.join("\n")
    }

    fn commit(&mut self, index: u64, hint: &str, response: &str) -> Result<Turn> {
        let turn = self
            .session
            .run_turn_with(hint, |_, _| Ok(response.to_string()))?;
        debug_assert_eq!(turn.index, index, "session turn index tracks game turns");
        Ok(turn)
    }
}

/// Final result of one match.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameOutcome {
    pub seed: u64,
    pub keyword: String,
    pub category: String,
    pub success: bool,
    pub turns_used: usize,
    pub records: Vec<MatchRecord>,
    /// Transcript rows for the arm that played this match.
    pub turns: Vec<Turn>,
    /// Populated when an agent failed mid-match (the match counts as a
    /// failure).
    pub diagnostic: Option<String>,
}

impl GameOutcome {
    /// JSON Lines log: one line per exchange plus a summary line.
    pub fn to_log_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for record in &self.records {
            let line = serde_json::json!({
                "seed": self.seed,
                "turn": record.turn,
                "question": record.question,
                "answer": record.answer.as_str(),
                "guess": record.guess,
            });
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        let summary = serde_json::json!({
            "seed": self.seed,
            "outcome": if self.success { "success" } else { "failure" },
            "keyword": self.keyword,
            "turns_used": self.turns_used,
            "diagnostic": self.diagnostic,
        });
        out.push_str(&serde_json::to_string(&summary)?);
        out.push('\n');
        Ok(out)
    }
}

fn render_response(mv: &GuesserMove) -> String {
    match &mv.guess {
        Some(g) if mv.question == question_for_guess(g) => mv.question.clone(),
        Some(g) => format!("{} (guess: {g})", mv.question),
        None => mv.question.clone(),
    }
}

/// Plays one full match. Agent errors end the match as a failure with a
/// diagnostic; the exchanges completed so far are preserved.
pub fn run_match(
    corpus: &Corpus,
    seed: u64,
    guesser: &mut dyn Guesser,
    answerer: &mut dyn Answerer,
    provider: &mut dyn ContextProvider,
) -> Result<GameOutcome> {
    let mut state = GameState::new_game(corpus, seed)?;
    let keyword = state.keyword().clone();
    let mut turns = Vec::new();
    let mut diagnostic = None;
    let mut hint = format!("category: {}", keyword.category);

    while state.status() == GameStatus::InProgress {
        let turn_no = state.turn();
        let context = provider.context(&hint);
        let mv = match guesser.next_move(turn_no, &context) {
            Ok(mv) => mv,
            Err(e) => {
                diagnostic = Some(format!("guesser failed on turn {turn_no}: {e}"));
                break;
            }
        };
        let answer = match answerer.answer(&keyword, &mv.question) {
            Ok(a) => a,
            Err(e) => {
                diagnostic = Some(format!("answerer failed on turn {turn_no}: {e}"));
                break;
            }
        };
        state.step_with_answer(&mv.question, answer, mv.guess.as_deref())?;
        let response = render_response(&mv);
        match provider.commit(turn_no as u64, &hint, &response) {
            Ok(turn) => turns.push(turn),
            Err(e) => {
                diagnostic = Some(format!("context provider failed on turn {turn_no}: {e}"));
                break;
            }
        }
        hint = format!("{} {}", mv.question, answer);
    }

    let success = diagnostic.is_none() && state.status() == GameStatus::Success;
    Ok(GameOutcome {
        seed,
        keyword: keyword.text,
        category: keyword.category,
        success,
        turns_used: state.history().len(),
        records: state.history().to_vec(),
        turns,
        diagnostic,
    })
}
