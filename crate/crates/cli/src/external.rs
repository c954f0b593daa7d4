//! Objectives backed by long-lived subprocesses speaking a line protocol:
//! one whitespace-separated point per line in, one scalar per line out.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Condvar, Mutex};

use corsrbf::{EvalError, Objective};

use crate::csvio::num;

struct Worker {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Worker {
    fn spawn(argv: &[String]) -> Result<Self, EvalError> {
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| EvalError::new(format!("cannot start `{}`: {e}", argv[0])))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            child,
            stdin,
            stdout,
        })
    }

    fn query(&mut self, x: &[f64]) -> Result<f64, EvalError> {
        let line: Vec<String> = x.iter().map(|v| num(*v)).collect();
        writeln!(self.stdin, "{}", line.join(" "))
            .and_then(|_| self.stdin.flush())
            .map_err(|e| EvalError::new(format!("writing to objective: {e}")))?;
        let mut reply = String::new();
        let read = self
            .stdout
            .read_line(&mut reply)
            .map_err(|e| EvalError::new(format!("reading from objective: {e}")))?;
        if read == 0 {
            return Err(EvalError::new("objective closed its output"));
        }
        reply
            .trim()
            .parse()
            .map_err(|_| EvalError::new(format!("objective replied `{}`, not a number", reply.trim())))
    }

    fn shutdown(mut self) {
        drop(self.stdin);
        let _ = self.child.wait();
    }
}

#[derive(Default)]
struct Pool {
    idle: Vec<Worker>,
    live: usize,
}

/// Up to `slots` subprocesses, started on demand and reused across batches.
pub struct ExternalObjective {
    argv: Vec<String>,
    slots: usize,
    pool: Mutex<Pool>,
    freed: Condvar,
}

impl ExternalObjective {
    pub fn new(argv: Vec<String>, slots: usize) -> Self {
        assert!(!argv.is_empty(), "empty objective command");
        Self {
            argv,
            slots: slots.max(1),
            pool: Mutex::new(Pool::default()),
            freed: Condvar::new(),
        }
    }

    fn checkout(&self) -> Result<Worker, EvalError> {
        let mut pool = self.pool.lock().expect("worker pool");
        loop {
            if let Some(w) = pool.idle.pop() {
                return Ok(w);
            }
            if pool.live < self.slots {
                pool.live += 1;
                drop(pool);
                return Worker::spawn(&self.argv).inspect_err(|_| {
                    self.pool.lock().expect("worker pool").live -= 1;
                    self.freed.notify_one();
                });
            }
            pool = self.freed.wait(pool).expect("worker pool");
        }
    }
}

impl Objective for ExternalObjective {
    fn evaluate(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut worker = self.checkout()?;
        let out = worker.query(x);
        let mut pool = self.pool.lock().expect("worker pool");
        if out.is_ok() {
            pool.idle.push(worker);
        } else {
            pool.live -= 1;
            let _ = worker.child.kill();
            let _ = worker.child.wait();
        }
        drop(pool);
        self.freed.notify_one();
        out
    }
}

impl Drop for ExternalObjective {
    fn drop(&mut self) {
        let pool = self.pool.get_mut().expect("worker pool");
        for w in pool.idle.drain(..) {
            w.shutdown();
        }
    }
}
