//! Writes a few tags to a CTAG file, reads them back and checks the
//! strict-mode ordering guard.

use qdcascade::timetag::{read_tags, write_tags, TimeTag, WriteMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("qdcascade-tag-codec");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("demo.ctag");

    let tags: Vec<TimeTag> = (0..5u64).map(|k| TimeTag::new((k % 2) as u16, 12_500 * k + 161)).collect();
    let n = write_tags(&tags, &path, WriteMode::Strict)?;
    let back = read_tags(&path)?;
    println!("wrote {n} tags, {} bytes", std::fs::metadata(&path)?.len());
    for t in &back {
        println!("  ch {} at {} ps", t.channel, t.time);
    }
    assert_eq!(back, tags);

    let unsorted = [TimeTag::new(0, 200), TimeTag::new(0, 100)];
    match write_tags(&unsorted, dir.join("bad.ctag"), WriteMode::Strict) {
        Err(e) => println!("unsorted input rejected: {e}"),
        Ok(_) => println!("unexpected: unsorted input accepted"),
    }
    Ok(())
}
