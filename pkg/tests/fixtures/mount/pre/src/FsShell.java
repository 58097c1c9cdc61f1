public class FsShell {
    private FileSystemMaster mMaster;

    public int runMount(String[] args) throws IOException {
        mMaster.mount(new AlluxioURI(args[0]), new AlluxioURI(args[1]), MountOptions.defaults());
        return 0;
    }
}
