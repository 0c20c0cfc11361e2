use std::fmt;

use super::store::SessionStore;

/// Corpus summary in the shape of a dataset-statistics table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub events: usize,
    pub links: usize,
    pub sessions: usize,
    pub avg_friends_per_user: f64,
    pub avg_events_per_user: f64,
    pub avg_session_length: f64,
}

impl DatasetStats {
    /// `links` counts undirected edges; `num_users`/`num_items` are
    /// vocabulary sizes.
    pub fn compute(store: &SessionStore, num_users: usize, num_items: usize, links: usize) -> Self {
        let events = store.num_events();
        let per_user = |x: f64| if num_users == 0 { 0.0 } else { x / num_users as f64 };
        Self {
            users: num_users,
            items: num_items,
            events,
            links,
            sessions: store.num_sessions(),
            avg_friends_per_user: per_user(2.0 * links as f64),
            avg_events_per_user: per_user(events as f64),
            avg_session_length: store.avg_session_length(),
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "users,items,events,links,sessions,avg_friends_per_user,avg_events_per_user,avg_session_length\n\
             {},{},{},{},{},{:.4},{:.4},{:.4}\n",
            self.users,
            self.items,
            self.events,
            self.links,
            self.sessions,
            self.avg_friends_per_user,
            self.avg_events_per_user,
            self.avg_session_length
        )
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "users                 {}", self.users)?;
        writeln!(f, "items                 {}", self.items)?;
        writeln!(f, "events                {}", self.events)?;
        writeln!(f, "links                 {}", self.links)?;
        writeln!(f, "sessions              {}", self.sessions)?;
        writeln!(f, "avg friends per user  {:.2}", self.avg_friends_per_user)?;
        writeln!(f, "avg events per user   {:.2}", self.avg_events_per_user)?;
        write!(f, "avg session length    {:.2}", self.avg_session_length)
    }
}
