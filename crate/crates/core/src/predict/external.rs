//! Bridge to predictors running in a child process.
//!
//! Wire protocol: the parent writes one canonical PFM blob per patch to the
//! child's stdin, in order, then closes it. The child writes exactly one PFM
//! blob per request to stdout, in the same order, with the same channel
//! count and dimensions. There is no other framing.

use std::io::{BufReader, BufWriter, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;

use crate::error::{Error, Result};
use crate::imageio::{read_pfm_from, write_pfm_to};
use crate::tensor::ImageTensor;

/// Sends `patches` through the child and returns its responses in order.
pub fn predict_stream(command: &[String], patches: &[ImageTensor]) -> Result<Vec<ImageTensor>> {
    let mut out = Vec::with_capacity(patches.len());
    stream_patches(
        command,
        patches.len(),
        |k| Ok(patches[k].clone()),
        |_, response| {
            out.push(response);
            Ok(())
        },
    )?;
    Ok(out)
}

enum ReadStop {
    /// The child stream failed at this request index.
    Protocol(usize, String),
    /// The request producer stopped early; its error comes from the writer.
    WriterStopped,
    /// The consumer rejected a response.
    Consumer(Error),
}

/// Streams `count` patches through one child process. `produce(k)` builds
/// request `k` on a writer thread while responses are handed to
/// `consume(k, response)` on the calling thread, so at most a pipe's worth of
/// patches is in flight.
pub(crate) fn stream_patches<P, C>(
    command: &[String],
    count: usize,
    mut produce: P,
    mut consume: C,
) -> Result<()>
where
    P: FnMut(usize) -> Result<ImageTensor> + Send,
    C: FnMut(usize, ImageTensor) -> Result<()>,
{
    let program = command.first().ok_or_else(|| Error::External {
        index: 0,
        reason: "empty command".into(),
    })?;
    let mut child = Command::new(program)
        .args(&command[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| Error::External {
            index: 0,
            reason: format!("cannot start `{program}`: {e}"),
        })?;
    let stdin = child.stdin.take().expect("stdin is piped");
    let stdout = child.stdout.take().expect("stdout is piped");
    let (dims_tx, dims_rx) = mpsc::channel();

    let (read_result, write_result) = thread::scope(|scope| {
        let writer = scope.spawn(move || -> Result<()> {
            let mut sink = BufWriter::new(stdin);
            for k in 0..count {
                let patch = produce(k)?;
                let _ = dims_tx.send(patch.dims());
                write_pfm_to(&mut sink, &patch)?;
            }
            sink.flush()?;
            Ok(())
        });

        let mut source = BufReader::new(stdout);
        let mut read = || -> std::result::Result<(), ReadStop> {
            for k in 0..count {
                let response = match read_pfm_from(&mut source) {
                    Ok(Some(r)) => r,
                    Ok(None) => return Err(ReadStop::Protocol(k, "response stream ended".into())),
                    Err(e) => return Err(ReadStop::Protocol(k, e.to_string())),
                };
                let expected = dims_rx.recv().map_err(|_| ReadStop::WriterStopped)?;
                if response.dims() != expected {
                    return Err(ReadStop::Protocol(
                        k,
                        format!(
                            "response is {:?}, request was {:?}",
                            response.dims(),
                            expected
                        ),
                    ));
                }
                consume(k, response).map_err(ReadStop::Consumer)?;
            }
            Ok(())
        };
        let read_result = read();
        if read_result.is_err() {
            let _ = child.kill();
        }
        drop(source);
        (read_result, writer.join().expect("writer thread panicked"))
    });

    let status = child.wait()?;
    match read_result {
        Err(ReadStop::Consumer(e)) => Err(e),
        Err(ReadStop::Protocol(index, reason)) => {
            // a producer failure explains a short stream better than EOF does
            if let Err(e) = write_result {
                if !matches!(e, Error::Io(_)) {
                    return Err(e);
                }
            }
            let reason = if status.success() {
                reason
            } else {
                format!("child {status}: {reason}")
            };
            Err(Error::External { index, reason })
        }
        Err(ReadStop::WriterStopped) => {
            Err(write_result.err().unwrap_or_else(|| Error::External {
                index: 0,
                reason: "request writer stopped".into(),
            }))
        }
        Ok(()) => {
            write_result.map_err(|e| Error::External {
                index: count,
                reason: format!("writing requests failed: {e}"),
            })?;
            if !status.success() {
                return Err(Error::External {
                    index: count,
                    reason: format!("child {status} after answering all requests"),
                });
            }
            Ok(())
        }
    }
}
