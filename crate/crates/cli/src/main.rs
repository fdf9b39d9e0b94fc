fn main() {
    println!("biview");
}
