//! Posts, comments, and votes for the discussion hub.
//!
//! [`CommunityState`] holds the data and enforces the rules; the two stores
//! wrap it in a mutex (so every operation is atomic) and the file store
//! additionally journals each mutation as a line of JSON. The journal format
//! is the same as the export dump, so a dump can seed a file store.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

pub type PostId = u64;
pub type CommentId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: PostId,
    pub author_id: String,
    pub title: String,
    pub body: String,
    pub linked_claim_id: Option<String>,
    pub created_at: DateTime<Utc>,
    pub score: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: CommentId,
    pub post_id: PostId,
    pub author_id: String,
    pub body: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteDirection {
    Up,
    Down,
}

impl VoteDirection {
    pub fn weight(self) -> i64 {
        match self {
            Self::Up => 1,
            Self::Down => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub post_id: PostId,
    pub voter_id: String,
    pub direction: VoteDirection,
    pub cast_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    #[default]
    New,
    Top,
}

/// 1-based page of `size` posts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Page {
    pub number: usize,
    pub size: usize,
}

impl Default for Page {
    fn default() -> Self {
        Self { number: 1, size: 20 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CommunityError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("post {0} not found")]
    PostNotFound(PostId),
    #[error("storage failure: {0}")]
    Storage(String),
}

/// Journal / dump record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Record {
    Post(Post),
    Comment(Comment),
    Vote(Vote),
}

#[derive(Debug, Default, Clone)]
pub struct CommunityState {
    posts: BTreeMap<PostId, Post>,
    comments: BTreeMap<CommentId, Comment>,
    votes: HashMap<(PostId, String), Vote>,
    next_post: PostId,
    next_comment: CommentId,
}

fn require_text(field: &str, value: &str) -> Result<(), CommunityError> {
    if value.trim().is_empty() {
        Err(CommunityError::Validation(format!("{field} must not be empty")))
    } else {
        Ok(())
    }
}

impl CommunityState {
    pub fn create_post(
        &mut self,
        author_id: &str,
        title: &str,
        body: &str,
        linked_claim_id: Option<String>,
        now: DateTime<Utc>,
    ) -> Result<Post, CommunityError> {
        require_text("title", title)?;
        self.next_post += 1;
        let post = Post {
            id: self.next_post,
            author_id: author_id.to_string(),
            title: title.trim().to_string(),
            body: body.to_string(),
            linked_claim_id,
            created_at: now,
            score: 0,
        };
        self.posts.insert(post.id, post.clone());
        Ok(post)
    }

    pub fn post(&self, id: PostId) -> Result<&Post, CommunityError> {
        self.posts.get(&id).ok_or(CommunityError::PostNotFound(id))
    }

    pub fn add_comment(
        &mut self,
        post_id: PostId,
        author_id: &str,
        body: &str,
        now: DateTime<Utc>,
    ) -> Result<Comment, CommunityError> {
        self.post(post_id)?;
        require_text("body", body)?;
        self.next_comment += 1;
        let comment = Comment {
            id: self.next_comment,
            post_id,
            author_id: author_id.to_string(),
            body: body.to_string(),
            created_at: now,
        };
        self.comments.insert(comment.id, comment.clone());
        Ok(comment)
    }

    /// Comments under `post_id`, oldest first (ties by id).
    pub fn comments(&self, post_id: PostId) -> Result<Vec<Comment>, CommunityError> {
        self.post(post_id)?;
        let mut out: Vec<Comment> = self.comments.values().filter(|c| c.post_id == post_id).cloned().collect();
        out.sort_by(|a, b| (a.created_at, a.id).cmp(&(b.created_at, b.id)));
        Ok(out)
    }

    /// Upserts the voter's vote and returns the post's new score.
    pub fn cast_vote(
        &mut self,
        post_id: PostId,
        voter_id: &str,
        direction: VoteDirection,
        now: DateTime<Utc>,
    ) -> Result<(i64, Option<Vote>), CommunityError> {
        self.post(post_id)?;
        require_text("voter_id", voter_id)?;
        let key = (post_id, voter_id.to_string());
        let previous = self.votes.get(&key).map(|v| v.direction);
        if previous == Some(direction) {
            return Ok((self.posts[&post_id].score, None));
        }
        let delta = direction.weight() - previous.map_or(0, VoteDirection::weight);
        let vote = Vote {
            post_id,
            voter_id: voter_id.to_string(),
            direction,
            cast_at: now,
        };
        self.votes.insert(key, vote.clone());
        let post = self.posts.get_mut(&post_id).expect("checked above");
        post.score += delta;
        Ok((post.score, Some(vote)))
    }

    pub fn votes(&self, post_id: PostId) -> Vec<Vote> {
        let mut out: Vec<Vote> = self.votes.values().filter(|v| v.post_id == post_id).cloned().collect();
        out.sort_by(|a, b| a.voter_id.cmp(&b.voter_id));
        out
    }

    /// Total order: `New` is newest first, `Top` is highest score first;
    /// remaining ties go to the lower id.
    pub fn list_posts(&self, sort: SortOrder, page: Page) -> Vec<Post> {
        let mut posts: Vec<&Post> = self.posts.values().collect();
        match sort {
            SortOrder::New => posts.sort_by(|a, b| b.created_at.cmp(&a.created_at).then(a.id.cmp(&b.id))),
            SortOrder::Top => posts.sort_by(|a, b| b.score.cmp(&a.score).then(a.id.cmp(&b.id))),
        }
        if page.size == 0 || page.number == 0 {
            return Vec::new();
        }
        posts
            .into_iter()
            .skip((page.number - 1).saturating_mul(page.size))
            .take(page.size)
            .cloned()
            .collect()
    }

    pub fn apply(&mut self, record: Record) -> Result<(), CommunityError> {
        match record {
            Record::Post(p) => {
                self.next_post = self.next_post.max(p.id);
                self.posts.insert(p.id, Post { score: 0, ..p });
                self.rescore(self.next_post);
            }
            Record::Comment(c) => {
                self.post(c.post_id)?;
                self.next_comment = self.next_comment.max(c.id);
                self.comments.insert(c.id, c);
            }
            Record::Vote(v) => {
                let post_id = v.post_id;
                self.post(post_id)?;
                self.votes.insert((post_id, v.voter_id.clone()), v);
                self.rescore(post_id);
            }
        }
        Ok(())
    }

    fn rescore(&mut self, post_id: PostId) {
        let score = self.recomputed_score(post_id);
        if let Some(p) = self.posts.get_mut(&post_id) {
            p.score = score;
        }
    }

    /// Score recomputed from scratch from the stored votes.
    pub fn recomputed_score(&self, post_id: PostId) -> i64 {
        self.votes
            .values()
            .filter(|v| v.post_id == post_id)
            .map(|v| v.direction.weight())
            .sum()
    }

    /// Posts, then comments, then votes, each in id / key order.
    pub fn records(&self) -> Vec<Record> {
        let mut out: Vec<Record> = self.posts.values().cloned().map(Record::Post).collect();
        out.extend(self.comments.values().cloned().map(Record::Comment));
        let mut votes: Vec<&Vote> = self.votes.values().collect();
        votes.sort_by(|a, b| (a.post_id, &a.voter_id).cmp(&(b.post_id, &b.voter_id)));
        out.extend(votes.into_iter().cloned().map(Record::Vote));
        out
    }
}

pub trait CommunityStore: Send + Sync {
    fn create_post(
        &self,
        author_id: &str,
        title: &str,
        body: &str,
        linked_claim_id: Option<String>,
    ) -> Result<Post, CommunityError>;
    fn get_post(&self, id: PostId) -> Result<Post, CommunityError>;
    fn add_comment(&self, post_id: PostId, author_id: &str, body: &str) -> Result<Comment, CommunityError>;
    fn list_comments(&self, post_id: PostId) -> Result<Vec<Comment>, CommunityError>;
    fn cast_vote(&self, post_id: PostId, voter_id: &str, direction: VoteDirection) -> Result<i64, CommunityError>;
    fn list_posts(&self, sort: SortOrder, page: Page) -> Vec<Post>;
    fn votes(&self, post_id: PostId) -> Vec<Vote>;
    fn snapshot(&self) -> CommunityState;

    fn export_jsonl(&self, out: &mut dyn Write) -> Result<(), CommunityError> {
        for record in self.snapshot().records() {
            let line = serde_json::to_string(&record).map_err(|e| CommunityError::Storage(e.to_string()))?;
            writeln!(out, "{line}").map_err(|e| CommunityError::Storage(e.to_string()))?;
        }
        Ok(())
    }
}

pub type SharedCommunity = Arc<dyn CommunityStore>;
pub type Now = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

fn read_records(reader: impl BufRead) -> Result<Vec<Record>, CommunityError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CommunityError::Storage(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| CommunityError::Storage(format!("line {}: {e}", idx + 1)))?;
        out.push(record);
    }
    Ok(out)
}

pub struct MemoryStore {
    state: Mutex<CommunityState>,
    now: Now,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::with_clock(Arc::new(Utc::now))
    }

    pub fn with_clock(now: Now) -> Self {
        Self {
            state: Mutex::new(CommunityState::default()),
            now,
        }
    }

    pub fn import_jsonl(reader: impl BufRead, now: Now) -> Result<Self, CommunityError> {
        let mut state = CommunityState::default();
        for r in read_records(reader)? {
            state.apply(r)?;
        }
        Ok(Self {
            state: Mutex::new(state),
            now,
        })
    }
}

impl Default for MemoryStore {
    fn default() -> Self {
        Self::new()
    }
}

impl CommunityStore for MemoryStore {
    fn create_post(
        &self,
        author_id: &str,
        title: &str,
        body: &str,
        linked_claim_id: Option<String>,
    ) -> Result<Post, CommunityError> {
        self.state
            .lock()
            .create_post(author_id, title, body, linked_claim_id, (self.now)())
    }

    fn get_post(&self, id: PostId) -> Result<Post, CommunityError> {
        self.state.lock().post(id).cloned()
    }

    fn add_comment(&self, post_id: PostId, author_id: &str, body: &str) -> Result<Comment, CommunityError> {
        self.state.lock().add_comment(post_id, author_id, body, (self.now)())
    }

    fn list_comments(&self, post_id: PostId) -> Result<Vec<Comment>, CommunityError> {
        self.state.lock().comments(post_id)
    }

    fn cast_vote(&self, post_id: PostId, voter_id: &str, direction: VoteDirection) -> Result<i64, CommunityError> {
        Ok(self.state.lock().cast_vote(post_id, voter_id, direction, (self.now)())?.0)
    }

    fn list_posts(&self, sort: SortOrder, page: Page) -> Vec<Post> {
        self.state.lock().list_posts(sort, page)
    }

    fn votes(&self, post_id: PostId) -> Vec<Vote> {
        self.state.lock().votes(post_id)
    }

    fn snapshot(&self) -> CommunityState {
        self.state.lock().clone()
    }
}

/// Journaled store: state lives in memory, every mutation is appended to a
/// JSONL file and replayed on open.
pub struct FileStore {
    inner: Mutex<(CommunityState, BufWriter<File>)>,
    path: PathBuf,
    now: Now,
}

impl FileStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CommunityError> {
        Self::open_with_clock(path, Arc::new(Utc::now))
    }

    pub fn open_with_clock(path: impl AsRef<Path>, now: Now) -> Result<Self, CommunityError> {
        let path = path.as_ref().to_path_buf();
        let storage = |e: std::io::Error| CommunityError::Storage(format!("{}: {e}", path.display()));
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(storage)?;
        }
        let mut state = CommunityState::default();
        if path.exists() {
            let file = File::open(&path).map_err(storage)?;
            for r in read_records(BufReader::new(file))? {
                state.apply(r)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(storage)?;
        Ok(Self {
            inner: Mutex::new((state, BufWriter::new(file))),
            path,
            now,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn journal(out: &mut BufWriter<File>, record: &Record) -> Result<(), CommunityError> {
        let line = serde_json::to_string(record).map_err(|e| CommunityError::Storage(e.to_string()))?;
        writeln!(out, "{line}")
            .and_then(|_| out.flush())
            .map_err(|e| CommunityError::Storage(e.to_string()))
    }
}

impl CommunityStore for FileStore {
    fn create_post(
        &self,
        author_id: &str,
        title: &str,
        body: &str,
        linked_claim_id: Option<String>,
    ) -> Result<Post, CommunityError> {
        let mut guard = self.inner.lock();
        let (state, out) = &mut *guard;
        let post = state.create_post(author_id, title, body, linked_claim_id, (self.now)())?;
        Self::journal(out, &Record::Post(post.clone()))?;
        Ok(post)
    }

    fn get_post(&self, id: PostId) -> Result<Post, CommunityError> {
        self.inner.lock().0.post(id).cloned()
    }

    fn add_comment(&self, post_id: PostId, author_id: &str, body: &str) -> Result<Comment, CommunityError> {
        let mut guard = self.inner.lock();
        let (state, out) = &mut *guard;
        let comment = state.add_comment(post_id, author_id, body, (self.now)())?;
        Self::journal(out, &Record::Comment(comment.clone()))?;
        Ok(comment)
    }

    fn list_comments(&self, post_id: PostId) -> Result<Vec<Comment>, CommunityError> {
        self.inner.lock().0.comments(post_id)
    }

    fn cast_vote(&self, post_id: PostId, voter_id: &str, direction: VoteDirection) -> Result<i64, CommunityError> {
        let mut guard = self.inner.lock();
        let (state, out) = &mut *guard;
        let (score, changed) = state.cast_vote(post_id, voter_id, direction, (self.now)())?;
        if let Some(vote) = changed {
            Self::journal(out, &Record::Vote(vote))?;
        }
        Ok(score)
    }

    fn list_posts(&self, sort: SortOrder, page: Page) -> Vec<Post> {
        self.inner.lock().0.list_posts(sort, page)
    }

    fn votes(&self, post_id: PostId) -> Vec<Vote> {
        self.inner.lock().0.votes(post_id)
    }

    fn snapshot(&self) -> CommunityState {
        self.inner.lock().0.clone()
    }
}
